#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bytener/checkpoint.hpp"
#include "bytener/corpus.hpp"
#include "bytener/embedding.hpp"
#include "bytener/eval.hpp"
#include "bytener/network.hpp"
#include "helpers.hpp"

using namespace bytener;
using testutil::TempFile;

namespace {

int run(const std::string& args, const std::string& stderr_file = "") {
  std::string cmd = std::string(BYTENER_CLI_PATH) + " " + args;
  cmd += stderr_file.empty() ? " > /dev/null 2>&1"
                             : " > /dev/null 2> " + stderr_file;
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string digit_jsonl(uint64_t seed, size_t docs, size_t len) {
  Rng rng(seed);
  std::string out;
  for (size_t d = 0; d < docs; ++d) {
    std::string bytes;
    while (bytes.size() < len) {
      if (rng.uniform() < 0.25) {
        const size_t run_len = 1 + rng.uniform_int(5);
        for (size_t i = 0; i < run_len && bytes.size() < len; ++i)
          bytes.push_back(static_cast<char>('0' + rng.uniform_int(10)));
      } else {
        const size_t run_len = 1 + rng.uniform_int(6);
        for (size_t i = 0; i < run_len && bytes.size() < len; ++i) {
          const int r = static_cast<int>(rng.uniform_int(27));
          bytes.push_back(r == 26 ? ' ' : static_cast<char>('a' + r));
        }
      }
    }
    nlohmann::json spans = nlohmann::json::array();
    size_t i = 0;
    while (i < bytes.size()) {
      if (bytes[i] >= '0' && bytes[i] <= '9') {
        const size_t start = i;
        while (i < bytes.size() && bytes[i] >= '0' && bytes[i] <= '9') ++i;
        spans.push_back({{"start", start}, {"end", i}, {"type", "num"}});
      } else {
        ++i;
      }
    }
    nlohmann::json rec{
        {"doc_id", "d" + std::to_string(d)}, {"text", bytes}, {"spans", spans}};
    out += rec.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("bpe-train reproduces the hand oracle") {
  TempFile corpus(".txt");
  corpus.write("ab ab ab abc abc");  // {ab:3, abc:2}
  TempFile out(".bpe");
  CHECK(run("bpe-train --corpus " + corpus.path() + " --merges 2 --out " +
            out.path()) == 0);
  const std::string text = out.read();
  CHECK(text == "#bpe v1 2\na b\nab </w>\n");
}

TEST_CASE("bpe-train: zero merges writes a header-only file") {
  TempFile corpus(".txt");
  corpus.write("x y z");
  TempFile out(".bpe");
  CHECK(run("bpe-train --corpus " + corpus.path() + " --merges 0 --out " +
            out.path()) == 0);
  CHECK(out.read() == "#bpe v1 0\n");
}

TEST_CASE("bpe-train: missing corpus exits 2") {
  CHECK(run("bpe-train --corpus /nonexistent/c.txt --out /tmp/x.bpe") == 2);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run("") == 1);
  CHECK(run("bpe-train") == 1);             // missing required options
  CHECK(run("no-such-subcommand") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("embed-train output loads with the requested dimension") {
  TempFile corpus(".txt");
  corpus.write("slow slot slow slot slow slot brew brow brew brow");
  TempFile book(".bpe");
  REQUIRE(run("bpe-train --corpus " + corpus.path() + " --merges 8 --out " +
              book.path()) == 0);
  TempFile vec(".vec");
  CHECK(run("embed-train --corpus " + corpus.path() + " --codebook " +
            book.path() + " --dim 12 --epochs 3 --out " + vec.path() +
            " --seed 5") == 0);
  const EmbeddingTable t = load_word2vec_text(vec.path());
  CHECK(t.dim == 12);
  CHECK(t.tokens.size() >= 2);

  // deterministic per seed
  TempFile vec2(".vec");
  CHECK(run("embed-train --corpus " + corpus.path() + " --codebook " +
            book.path() + " --dim 12 --epochs 3 --out " + vec2.path() +
            " --seed 5") == 0);
  CHECK(vec.read() == vec2.read());
}

TEST_CASE("train, predict, eval pipeline") {
  TempFile train_data(".jsonl");
  train_data.write(digit_jsonl(1, 160, 40));
  TempFile test_data(".jsonl");
  test_data.write(digit_jsonl(2, 12, 40));

  TempFile ckpt(".ckpt");
  TempFile config(".json");
  config.write(R"({
    "train": {"lr": 0.005, "batch_size": 16, "epochs": 18, "dropout": 0.1,
              "byte_dropout": 0.0, "seed": 3},
    "window": {"window_len": 40, "stride": 20},
    "features": {"use_byte_ids": true, "use_pretrained_bpe": false,
                 "byte_dropout_rate": 0.0},
    "dims": {"byte_dim": 8, "conv_layers": 2, "conv_filters": 8,
             "blstm_units": 8, "hidden_units": 8},
    "paths": {"train_data": ")" + train_data.path() + R"(",
              "checkpoint": ")" + ckpt.path() + R"("},
    "dev_fraction": 0.1
  })");

  CHECK(run("--config " + config.path() + " --deterministic train") == 0);
  CHECK(std::filesystem::exists(ckpt.path()));
  CHECK(std::filesystem::exists(ckpt.path() + ".config.json"));
  CHECK(std::filesystem::exists(ckpt.path() + ".log.json"));

  // resolved config file parses and carries the overridden values
  {
    std::ifstream in(ckpt.path() + ".config.json");
    nlohmann::json cj;
    in >> cj;
    CHECK(cj.at("train").at("epochs") == 18);
    CHECK(cj.at("window").at("window_len") == 40);
  }

  TempFile preds(".jsonl");
  CHECK(run("predict --checkpoint " + ckpt.path() + " --input " +
            test_data.path() + " --out " + preds.path()) == 0);

  // predictions round trip through corpus io and match in-process predict
  const Dataset test_ds = load_byte_offset_dataset(test_data.path());
  const Dataset pred_ds = load_byte_offset_dataset(preds.path());
  REQUIRE(pred_ds.documents.size() == test_ds.documents.size());

  const Checkpoint loaded = load_checkpoint(ckpt.path());
  WindowConfig wcfg{loaded.params.window_len, loaded.params.window_stride};
  const auto direct = predict(loaded.params, test_ds, wcfg,
                              loaded.codebook_ptr(), loaded.word_vocab_ptr());
  for (size_t i = 0; i < direct.size(); ++i) {
    std::vector<EntitySpan> expect = direct[i].spans;
    std::sort(expect.begin(), expect.end());
    CHECK(pred_ds.documents[i].spans == expect);
  }

  // eval: identical files → all-1.0 report
  TempFile report(".json");
  CHECK(run("eval --gold " + test_data.path() + " --pred " + test_data.path() +
            " --out " + report.path()) == 0);
  {
    std::ifstream in(report.path());
    nlohmann::json j;
    in >> j;
    CHECK(j.at("micro").at("f1") == 1.0);
    CHECK(j.at("micro").at("precision") == 1.0);
  }

  // eval of predictions runs and produces a bounded f1
  CHECK(run("eval --gold " + test_data.path() + " --pred " + preds.path() +
            " --out " + report.path()) == 0);
}

TEST_CASE("eval: mismatched doc ids exit 2") {
  TempFile a(".jsonl"), b(".jsonl");
  a.write(R"({"doc_id":"x","text":"abc","spans":[]})" "\n");
  b.write(R"({"doc_id":"y","text":"abc","spans":[]})" "\n");
  CHECK(run("eval --gold " + a.path() + " --pred " + b.path()) == 2);
}

TEST_CASE("train: bad config key names the key and exits nonzero") {
  TempFile config(".json");
  config.write(R"({"train": {"learning_rate": 0.1}})");
  TempFile err(".txt");
  CHECK(run("--config " + config.path() + " train", err.path()) == 2);
  CHECK(err.read().find("train.learning_rate") != std::string::npos);
}

TEST_CASE("predict: missing checkpoint exits 2") {
  TempFile in(".jsonl");
  in.write(R"({"doc_id":"x","text":"abc","spans":[]})" "\n");
  CHECK(run("predict --checkpoint /nonexistent.ckpt --input " + in.path() +
            " --out /tmp/p.jsonl") == 2);
}

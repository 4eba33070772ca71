#include <doctest.h>

#include "bytener/checkpoint.hpp"
#include "helpers.hpp"

using namespace bytener;
using testutil::TempFile;

namespace {

Checkpoint make_checkpoint() {
  Checkpoint ckpt;
  Codebook book = learn_codebook({{"slow", 4}, {"slot", 3}}, 5);
  EmbeddingTable table;
  table.dim = 3;
  table.unk.assign(3, 0.0f);
  for (const auto& sym : book.vocab()) {
    const std::string tok = sym.display();
    if (tok.empty()) continue;
    table.tokens.push_back(tok);
    table.vectors[tok] = {0.25f, -1.0f, 2.0f};
  }
  EmbeddingTable words;
  words.dim = 2;
  words.unk.assign(2, 0.0f);
  words.tokens = {"alpha", "beta"};
  words.vectors["alpha"] = {1.0f, 2.0f};
  words.vectors["beta"] = {3.0f, 4.0f};

  ckpt.codebook = book;
  ckpt.word_vocab = WordVocab(words);

  ModelInit init;
  init.dims.byte_dim = 4;
  init.dims.bpe_dim = 3;
  init.dims.conv_layers = 3;
  init.dims.conv_filters = 5;
  init.dims.blstm_units = 4;
  init.dims.hidden_units = 4;
  init.features.use_byte_ids = true;
  init.features.use_bpe_ids = true;
  init.features.use_pretrained_bpe = true;
  init.features.use_pretrained_word = true;
  init.labels = {"gene", "protein"};
  init.window_len = 24;
  init.window_stride = 12;
  init.codebook = &*ckpt.codebook;
  init.word_vocab = &*ckpt.word_vocab;
  init.pre_bpe = &table;
  init.pre_word = &words;
  init.seed = 17;
  ckpt.params = init_params<float>(init);
  return ckpt;
}

std::vector<float> flatten(const ModelParams<float>& p) {
  std::vector<float> out;
  p.for_each_param([&](const std::string&, const float* d, size_t n) {
    out.insert(out.end(), d, d + n);
  });
  return out;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const Checkpoint ckpt = make_checkpoint();
  TempFile f(".ckpt");
  save_checkpoint(ckpt, f.path());
  const Checkpoint back = load_checkpoint(f.path());

  CHECK(flatten(back.params) == flatten(ckpt.params));
  CHECK(back.params.labels == ckpt.params.labels);
  CHECK(back.params.window_len == 24);
  CHECK(back.params.window_stride == 12);
  CHECK(back.params.features == ckpt.params.features);
  CHECK(back.params.dims.conv_layers == 3);

  REQUIRE(back.codebook.has_value());
  CHECK(back.codebook->num_merges() == ckpt.codebook->num_merges());
  REQUIRE(back.codebook->vocab_size() == ckpt.codebook->vocab_size());
  for (size_t i = 0; i < back.codebook->vocab_size(); ++i)
    CHECK(back.codebook->symbol(static_cast<int>(i)).display() ==
          ckpt.codebook->symbol(static_cast<int>(i)).display());
  CHECK(segment_word(*back.codebook, "slow") ==
        segment_word(*ckpt.codebook, "slow"));

  REQUIRE(back.word_vocab.has_value());
  CHECK(back.word_vocab->tokens() == ckpt.word_vocab->tokens());

  // loaded model produces identical emissions
  Sample s;
  s.doc_id = "d";
  s.bytes = "slow beta slot";
  const FeatureIds ids =
      assemble_feature_ids(s, ckpt.params.features, &*ckpt.codebook,
                           &*ckpt.word_vocab, 24);
  const auto ea = emissions_forward(ckpt.params, ids, false);
  const auto eb = emissions_forward(back.params, ids, false);
  CHECK(ea == eb);
}

TEST_CASE("checkpoint: bytes-only model needs no codebook") {
  Checkpoint ckpt;
  ModelInit init;
  init.dims.byte_dim = 4;
  init.dims.conv_layers = 2;
  init.dims.conv_filters = 4;
  init.dims.blstm_units = 4;
  init.dims.hidden_units = 4;
  init.features.use_byte_ids = true;
  init.features.use_pretrained_bpe = false;
  init.labels = {"x"};
  init.window_len = 10;
  ckpt.params = init_params<float>(init);

  TempFile f(".ckpt");
  save_checkpoint(ckpt, f.path());
  const Checkpoint back = load_checkpoint(f.path());
  CHECK_FALSE(back.codebook.has_value());
  CHECK_FALSE(back.word_vocab.has_value());
  CHECK(flatten(back.params) == flatten(ckpt.params));
}

TEST_CASE("checkpoint: load errors") {
  TempFile f(".ckpt");
  f.write("not a checkpoint\n");
  CHECK_THROWS_AS(load_checkpoint(f.path()), DataError);

  TempFile g(".ckpt");
  g.write("{\"format\":\"bytener-checkpoint\",\"version\":99}\n");
  CHECK_THROWS_AS(load_checkpoint(g.path()), DataError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), DataError);

  // truncated tensor data
  const Checkpoint ckpt = make_checkpoint();
  TempFile h(".ckpt");
  save_checkpoint(ckpt, h.path());
  const std::string full = h.read();
  h.write(full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(h.path()), DataError);
}

#include <doctest.h>

#include <cmath>

#include "bytener/embedding.hpp"
#include "bytener/types.hpp"
#include "helpers.hpp"

using namespace bytener;
using testutil::TempFile;

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double num = 0, da = 0, db = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    da += a[i] * a[i];
    db += b[i] * b[i];
  }
  return num / (std::sqrt(da) * std::sqrt(db) + 1e-12);
}

std::vector<std::string> pair_corpus() {
  // "a b" pairs interleaved with unrelated "c d" pairs, separated so the
  // window never bridges the two groups
  std::vector<std::string> tokens;
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 6; ++j) {
      tokens.push_back("a");
      tokens.push_back("b");
    }
    for (int j = 0; j < 6; ++j) {
      tokens.push_back("c");
      tokens.push_back("d");
    }
  }
  return tokens;
}

}  // namespace

TEST_CASE("word2vec text load") {
  TempFile f(".vec");
  f.write("2 3\na 1.0 2.0 3.0\nb -1.0 0.5 0.25\n");
  const EmbeddingTable t = load_word2vec_text(f.path());
  CHECK(t.dim == 3);
  CHECK(t.tokens == std::vector<std::string>{"a", "b"});
  CHECK(t.lookup("a") == std::vector<float>{1.0f, 2.0f, 3.0f});
  CHECK(t.lookup("missing") == std::vector<float>{0.0f, 0.0f, 0.0f});
}

TEST_CASE("word2vec text load errors") {
  TempFile f(".vec");
  f.write("1 3\na 1.0 2.0\n");  // row with 2 floats under dim 3
  CHECK_THROWS_AS(load_word2vec_text(f.path()), DataError);

  TempFile g(".vec");
  g.write("1 3\na 1.0 2.0 3.0 4.0\n");  // too many floats
  CHECK_THROWS_AS(load_word2vec_text(g.path()), DataError);

  TempFile h(".vec");
  h.write("2 3\na 1 2 3\n");  // count mismatch
  CHECK_THROWS_AS(load_word2vec_text(h.path()), DataError);

  TempFile i(".vec");
  i.write("garbage\n");
  CHECK_THROWS_AS(load_word2vec_text(i.path()), DataError);
}

TEST_CASE("word2vec duplicate token: last wins") {
  TempFile f(".vec");
  f.write("3 2\na 1 1\nb 2 2\na 9 9\n");
  const EmbeddingTable t = load_word2vec_text(f.path());
  CHECK(t.lookup("a") == std::vector<float>{9.0f, 9.0f});
  CHECK(t.tokens.size() == 2);
}

TEST_CASE("word2vec save/load round trip") {
  EmbeddingTable t;
  t.dim = 2;
  t.unk.assign(2, 0.0f);
  t.tokens = {"x", "y"};
  t.vectors["x"] = {0.125f, -1.5f};
  t.vectors["y"] = {0.000001f, 42.0f};
  TempFile f(".vec");
  save_word2vec_text(t, f.path());
  const EmbeddingTable back = load_word2vec_text(f.path());
  CHECK(back.dim == 2);
  CHECK(back.lookup("x") == t.vectors["x"]);
  CHECK(back.lookup("y") == t.vectors["y"]);
}

TEST_CASE("skip-gram: shape contract and determinism") {
  const auto tokens = pair_corpus();
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  cfg.seed = 5;
  const EmbeddingTable a = train_skipgram(tokens, cfg);
  CHECK(a.dim == 8);
  for (const auto& tok : a.tokens) CHECK(a.lookup(tok).size() == 8);

  const EmbeddingTable b = train_skipgram(tokens, cfg);
  for (const auto& tok : a.tokens) CHECK(a.lookup(tok) == b.lookup(tok));

  cfg.seed = 6;
  const EmbeddingTable c = train_skipgram(tokens, cfg);
  bool any_diff = false;
  for (const auto& tok : a.tokens)
    if (a.lookup(tok) != c.lookup(tok)) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("skip-gram: zero epochs returns the seeded init") {
  const auto tokens = pair_corpus();
  SkipgramConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 0;
  cfg.seed = 11;
  const EmbeddingTable a = train_skipgram(tokens, cfg);
  const EmbeddingTable b = train_skipgram(tokens, cfg);
  const double bound = 0.5 / 4.0;
  for (const auto& tok : a.tokens) {
    CHECK(a.lookup(tok) == b.lookup(tok));
    for (float v : a.lookup(tok)) {
      CHECK(v >= -bound);
      CHECK(v <= bound);
    }
  }
}

TEST_CASE("skip-gram: co-occurring tokens end up closer") {
  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.window = 2;
  cfg.epochs = 10;
  cfg.seed = 3;
  const EmbeddingTable t = train_skipgram(pair_corpus(), cfg);
  const double ab = cosine(t.lookup("a"), t.lookup("b"));
  const double ac = cosine(t.lookup("a"), t.lookup("c"));
  CHECK(ab > ac);
}

TEST_CASE("skip-gram: epoch loss is non-increasing") {
  // small per-epoch corpus so the descent spans every measured epoch
  std::vector<std::string> tokens;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 6; ++j) {
      tokens.push_back("a");
      tokens.push_back("b");
    }
    for (int j = 0; j < 6; ++j) {
      tokens.push_back("c");
      tokens.push_back("d");
    }
  }
  for (uint64_t seed : {1, 2, 9}) {
    SkipgramConfig cfg;
    cfg.dim = 16;
    cfg.window = 2;
    cfg.epochs = 10;
    cfg.seed = seed;
    std::vector<double> losses;
    train_skipgram_model(tokens, cfg, &losses);
    REQUIRE(losses.size() == cfg.epochs + 1);
    for (size_t e = 1; e < losses.size(); ++e)
      CHECK(losses[e] <= losses[e - 1]);
  }
}

TEST_CASE("skip-gram: degenerate vocabulary") {
  CHECK_THROWS_AS(train_skipgram({"a", "a", "a"}, SkipgramConfig{}),
                  DataError);
}

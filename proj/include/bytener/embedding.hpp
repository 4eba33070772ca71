#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace bytener {

// Token -> dense vector table. Lookup of an absent token returns the all-zero
// UNK vector.
struct EmbeddingTable {
  size_t dim = 0;
  std::vector<std::string> tokens;  // insertion order, as loaded/trained
  std::unordered_map<std::string, std::vector<float>> vectors;

  const std::vector<float>& lookup(const std::string& token) const;
  std::vector<float> unk;  // all-zero, sized dim
};

// word2vec text format: first line "count dim", then "token v1 ... v_dim".
// Duplicate tokens keep the last row (warned on stderr).
EmbeddingTable load_word2vec_text(const std::string& path);

// Writer emits 6-decimal floats.
void save_word2vec_text(const EmbeddingTable& table, const std::string& path);

struct SkipgramConfig {
  size_t dim = 100;
  size_t window = 5;
  size_t epochs = 10;
  size_t negatives = 5;
  double initial_lr = 0.025;
  uint64_t seed = 1;
};

// Skip-gram with negative sampling over a flat token stream. Negatives come
// from the unigram^0.75 distribution; the step size decays linearly over all
// scheduled center-token visits. Deterministic for a fixed seed.
EmbeddingTable train_skipgram(const std::vector<std::string>& tokens,
                              const SkipgramConfig& cfg);

// Average negative-sampling loss of a table over the stream, with negatives
// drawn from a fixed evaluation seed; used to track training progress.
double skipgram_loss(const EmbeddingTable& centers, const EmbeddingTable& contexts,
                     const std::vector<std::string>& tokens,
                     const SkipgramConfig& cfg, uint64_t eval_seed);

// As train_skipgram but also exposes the context-side table so callers can
// evaluate the pair loss.
struct SkipgramModel {
  EmbeddingTable centers;
  EmbeddingTable contexts;
};
SkipgramModel train_skipgram_model(const std::vector<std::string>& tokens,
                                   const SkipgramConfig& cfg,
                                   std::vector<double>* epoch_losses = nullptr);

}  // namespace bytener

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "bytener/bpe.hpp"
#include "bytener/embedding.hpp"
#include "bytener/window.hpp"

namespace bytener {

struct FeatureConfig {
  bool use_byte_ids = true;
  bool use_bpe_ids = false;
  bool use_pretrained_bpe = true;
  bool use_pretrained_word = false;
  double byte_dropout_rate = 0.3;

  bool any_enabled() const {
    return use_byte_ids || use_bpe_ids || use_pretrained_bpe ||
           use_pretrained_word;
  }
  bool needs_codebook() const { return use_bpe_ids || use_pretrained_bpe; }

  bool operator==(const FeatureConfig&) const = default;
};

// Reserved byte-lane ids beyond the 256 raw values.
constexpr int kBytePad = 256;
constexpr int kByteDrop = 257;
constexpr int kByteVocabSize = 258;

// Word-id lane vocabulary: the tokens of the pretrained word table, with
// UNK = 0 and the whitespace placeholder = 1 (same convention as BPE ids).
class WordVocab {
public:
  static constexpr int kUnkId = 0;
  static constexpr int kWhitespaceId = 1;

  WordVocab() = default;
  explicit WordVocab(const EmbeddingTable& table);
  // From a stored token list in id order (tokens[0] = UNK "", tokens[1] =
  // whitespace placeholder).
  explicit WordVocab(std::vector<std::string> tokens_in_order);

  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int id_of(const std::string& token) const;

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Aligned per-byte id lanes, right-padded to the window length. Disabled
// lanes are left empty. The PAD id of the bpe/word lanes is the lane's
// vocabulary size (one extra embedding row).
struct FeatureIds {
  std::vector<int> byte_ids;
  std::vector<int> bpe_ids;
  std::vector<int> word_ids;
  size_t length = 0;  // true (unpadded) byte count
};

FeatureIds assemble_feature_ids(const Sample& sample, const FeatureConfig& cfg,
                                const Codebook* codebook,
                                const WordVocab* word_vocab,
                                size_t window_len);

// Replaces each non-PAD byte id with DROP independently with the given
// probability; other lanes are untouched. Deterministic per seed.
FeatureIds apply_byte_dropout(FeatureIds ids, double rate, uint64_t seed);

}  // namespace bytener

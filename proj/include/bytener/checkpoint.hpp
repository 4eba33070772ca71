#pragma once

#include <optional>
#include <string>

#include "bytener/bpe.hpp"
#include "bytener/features.hpp"
#include "bytener/network.hpp"

namespace bytener {

// A trained model plus everything needed to featurize new text: the BPE
// codebook (when BPE lanes are enabled) and the word vocabulary (when the
// word lane is enabled).
struct Checkpoint {
  ModelParams<float> params;
  std::optional<Codebook> codebook;
  std::optional<WordVocab> word_vocab;

  const Codebook* codebook_ptr() const {
    return codebook ? &*codebook : nullptr;
  }
  const WordVocab* word_vocab_ptr() const {
    return word_vocab ? &*word_vocab : nullptr;
  }
};

// Checkpoint file: one JSON header line (version, dims, feature config,
// labels, vocabularies, tensor manifest) followed by raw little-endian
// float32 tensor data in manifest order.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bytener

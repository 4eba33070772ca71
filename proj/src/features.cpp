#include "bytener/features.hpp"

#include <stdexcept>

#include "bytener/rng.hpp"
#include "bytener/types.hpp"

namespace bytener {

namespace {

bool is_space_byte(unsigned char c) {
  return c == 0x20 || c == 0x09 || c == 0x0A || c == 0x0D;
}

}  // namespace

WordVocab::WordVocab(const EmbeddingTable& table) {
  tokens_.push_back("");   // UNK
  tokens_.push_back(" ");  // whitespace placeholder
  for (const auto& t : table.tokens) {
    if (ids_.count(t)) continue;
    ids_[t] = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
  }
}

WordVocab::WordVocab(std::vector<std::string> tokens_in_order)
    : tokens_(std::move(tokens_in_order)) {
  if (tokens_.size() < 2 || !tokens_[0].empty() || tokens_[1] != " ")
    throw DataError("word vocab must start with UNK and whitespace");
  for (size_t i = 2; i < tokens_.size(); ++i)
    ids_[tokens_[i]] = static_cast<int>(i);
}

int WordVocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

FeatureIds assemble_feature_ids(const Sample& sample, const FeatureConfig& cfg,
                                const Codebook* codebook,
                                const WordVocab* word_vocab,
                                size_t window_len) {
  if (!cfg.any_enabled())
    throw std::invalid_argument("feature config enables no lanes");
  if (sample.bytes.size() > window_len)
    throw std::invalid_argument("sample longer than window");
  if (cfg.needs_codebook() && !codebook)
    throw std::invalid_argument("BPE features need a codebook");
  if (cfg.use_pretrained_word && !word_vocab)
    throw std::invalid_argument("word features need a word vocabulary");

  FeatureIds out;
  out.length = sample.bytes.size();
  const size_t n = out.length;

  if (cfg.use_byte_ids) {
    out.byte_ids.assign(window_len, kBytePad);
    for (size_t i = 0; i < n; ++i)
      out.byte_ids[i] = static_cast<unsigned char>(sample.bytes[i]);
  }

  if (cfg.needs_codebook()) {
    const int pad = static_cast<int>(codebook->vocab_size());
    out.bpe_ids.assign(window_len, pad);
    Segmentation seg = segment_bytes(*codebook, sample.bytes);
    for (size_t i = 0; i < n; ++i) out.bpe_ids[i] = seg.token_ids[i];
  }

  if (cfg.use_pretrained_word) {
    const int pad = static_cast<int>(word_vocab->size());
    out.word_ids.assign(window_len, pad);
    size_t i = 0;
    while (i < n) {
      if (is_space_byte(static_cast<unsigned char>(sample.bytes[i]))) {
        out.word_ids[i] = WordVocab::kWhitespaceId;
        ++i;
        continue;
      }
      size_t start = i;
      while (i < n && !is_space_byte(static_cast<unsigned char>(sample.bytes[i])))
        ++i;
      const int id = word_vocab->id_of(sample.bytes.substr(start, i - start));
      for (size_t p = start; p < i; ++p) out.word_ids[p] = id;
    }
  }

  return out;
}

FeatureIds apply_byte_dropout(FeatureIds ids, double rate, uint64_t seed) {
  if (rate < 0.0 || rate > 1.0)
    throw std::invalid_argument("byte-dropout rate out of [0,1]");
  if (ids.byte_ids.empty() || rate == 0.0) return ids;
  Rng rng(seed);
  // Only true byte positions are candidates; the PAD tail never changes and
  // never consumes a draw.
  for (size_t i = 0; i < ids.length; ++i)
    if (rng.uniform() < rate) ids.byte_ids[i] = kByteDrop;
  return ids;
}

}  // namespace bytener

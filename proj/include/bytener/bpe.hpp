#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bytener {

// A BPE symbol: a run of literal bytes, optionally carrying the end-of-word
// marker. The marker starts as a separate trailing symbol on every word and
// can be merged into a preceding unit, so it is always rightmost.
struct BpeSymbol {
  std::string bytes;
  bool eow = false;

  bool operator==(const BpeSymbol&) const = default;

  // Lexicographic over unsigned byte values, with eow ordered after any
  // byte. Drives the deterministic merge tie-break.
  static int compare(const BpeSymbol& a, const BpeSymbol& b);

  // Escaped form used in vocab keys, codebook files, and embedding tokens:
  // whitespace, backslash and '<' become \xHH escapes; eow renders "</w>".
  std::string display() const;
  static BpeSymbol parse(const std::string& display);
};

// Ordered merge list plus derived subword vocabulary. Vocab ids are dense;
// id 0 is UNK, id 1 the whitespace placeholder.
class Codebook {
public:
  static constexpr int kUnkId = 0;
  static constexpr int kWhitespaceId = 1;

  Codebook() = default;

  size_t num_merges() const { return merges_.size(); }
  const std::vector<std::pair<BpeSymbol, BpeSymbol>>& merges() const {
    return merges_;
  }
  size_t vocab_size() const { return vocab_.size(); }
  const std::vector<BpeSymbol>& vocab() const { return vocab_; }

  // -1 if absent.
  int id_of(const BpeSymbol& sym) const;
  int id_of_display(const std::string& display) const;
  const BpeSymbol& symbol(int id) const { return vocab_.at(id); }

  // Construction used by the learner and the file loader.
  void add_merge(BpeSymbol a, BpeSymbol b) {
    merges_.emplace_back(std::move(a), std::move(b));
  }
  void build_vocab(const std::vector<BpeSymbol>& base_symbols);

  // Rebuilds a codebook from explicit parts with the exact vocab order
  // (checkpoint embedding); displays[0] must be UNK, displays[1] the
  // whitespace placeholder.
  static Codebook from_parts(
      std::vector<std::pair<BpeSymbol, BpeSymbol>> merges,
      const std::vector<std::string>& vocab_displays);

  // Merge lookup for segmentation: (left id, right id) -> (rank, result id).
  struct MergeRule {
    int rank;
    int result;
  };
  const MergeRule* find_rule(int left, int right) const;

private:
  std::vector<std::pair<BpeSymbol, BpeSymbol>> merges_;
  std::vector<BpeSymbol> vocab_;
  std::unordered_map<std::string, int> vocab_by_display_;
  std::unordered_map<uint64_t, MergeRule> rules_;
};

// Words are maximal runs of non-whitespace bytes; whitespace is
// {0x20, 0x09, 0x0A, 0x0D}. std::map keeps iteration deterministic.
using WordFreqs = std::map<std::string, uint64_t>;

WordFreqs count_word_frequencies(std::string_view corpus);
void count_word_frequencies(std::string_view corpus, WordFreqs& freqs);

// Greedy pair merging: num_merges rounds, highest weighted pair count wins,
// ties broken by the lexicographically smallest pair; stops early when no
// pair occurs at least twice.
Codebook learn_codebook(const WordFreqs& word_freqs, size_t num_merges);

// Segments one non-empty word (bytes + eow) by the codebook's merges applied
// in order; returns subword display strings, eow marker included.
std::vector<std::string> segment_word(const Codebook& codebook,
                                      std::string_view word);

// Per-byte subword ids over arbitrary text. Bytes of one subword occurrence
// share one id; whitespace bytes carry the placeholder id; token_spans
// partition the non-whitespace bytes.
struct Segmentation {
  std::vector<int> token_ids;  // one per input byte
  struct TokenSpan {
    size_t start, end;  // byte range of the subword occurrence
    int id;
  };
  std::vector<TokenSpan> token_spans;
};

Segmentation segment_bytes(const Codebook& codebook, std::string_view bytes);

// Plain-text codebook file: header "#bpe v1 <num_merges>", then one
// "sym1 sym2" line per merge, escaped as in BpeSymbol::display.
void save_codebook(const Codebook& codebook, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace bytener

#include "bytener/bpe.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "bytener/types.hpp"

namespace bytener {

namespace {

constexpr const char* kEowDisplay = "</w>";

bool is_word_whitespace(unsigned char c) {
  return c == 0x20 || c == 0x09 || c == 0x0A || c == 0x0D;
}

bool needs_escape(unsigned char c) {
  return is_word_whitespace(c) || c == '\\' || c == '<' || c < 0x20;
}

uint64_t pack_pair(int a, int b) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
         static_cast<uint32_t>(b);
}

}  // namespace

int BpeSymbol::compare(const BpeSymbol& a, const BpeSymbol& b) {
  const size_t n = std::min(a.bytes.size(), b.bytes.size());
  for (size_t i = 0; i < n; ++i) {
    const auto ca = static_cast<unsigned char>(a.bytes[i]);
    const auto cb = static_cast<unsigned char>(b.bytes[i]);
    if (ca != cb) return ca < cb ? -1 : 1;
  }
  // Shorter prefix continues with either a real byte or the eow sentinel,
  // which is ordered above all bytes; absent trailing symbols order lowest.
  auto tail = [](const BpeSymbol& s, size_t pos) -> int {
    if (pos < s.bytes.size()) return static_cast<unsigned char>(s.bytes[pos]);
    if (pos == s.bytes.size() && s.eow) return 0x100;
    return -1;
  };
  for (size_t i = n;; ++i) {
    const int ta = tail(a, i);
    const int tb = tail(b, i);
    if (ta != tb) return ta < tb ? -1 : 1;
    if (ta == -1) return 0;
  }
}

std::string BpeSymbol::display() const {
  std::string out;
  for (unsigned char c : bytes) {
    if (needs_escape(c)) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\x%02X", c);
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  if (eow) out += kEowDisplay;
  return out;
}

BpeSymbol BpeSymbol::parse(const std::string& display) {
  BpeSymbol sym;
  std::string_view rest = display;
  if (rest.size() >= 4 && rest.substr(rest.size() - 4) == kEowDisplay) {
    sym.eow = true;
    rest = rest.substr(0, rest.size() - 4);
  }
  for (size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == '\\' && i + 3 < rest.size() && rest[i + 1] == 'x') {
      auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
      };
      const int hi = hex(rest[i + 2]), lo = hex(rest[i + 3]);
      if (hi < 0 || lo < 0)
        throw DataError("bad escape in symbol: " + display);
      sym.bytes.push_back(static_cast<char>(hi * 16 + lo));
      i += 3;
    } else {
      sym.bytes.push_back(rest[i]);
    }
  }
  return sym;
}

int Codebook::id_of(const BpeSymbol& sym) const {
  return id_of_display(sym.display());
}

int Codebook::id_of_display(const std::string& display) const {
  auto it = vocab_by_display_.find(display);
  return it == vocab_by_display_.end() ? -1 : it->second;
}

void Codebook::build_vocab(const std::vector<BpeSymbol>& base_symbols) {
  vocab_.clear();
  vocab_by_display_.clear();
  rules_.clear();

  auto add = [&](const BpeSymbol& sym) {
    const std::string key = sym.display();
    if (!vocab_by_display_.count(key)) {
      vocab_by_display_[key] = static_cast<int>(vocab_.size());
      vocab_.push_back(sym);
    }
  };

  add({"", false});   // UNK placeholder entry for id 0
  add({" ", false});  // whitespace placeholder entry for id 1

  std::vector<BpeSymbol> bases = base_symbols;
  std::sort(bases.begin(), bases.end(), [](const auto& a, const auto& b) {
    return BpeSymbol::compare(a, b) < 0;
  });
  for (const auto& s : bases) add(s);
  for (const auto& [a, b] : merges_)
    add({a.bytes + b.bytes, a.eow || b.eow});

  for (size_t rank = 0; rank < merges_.size(); ++rank) {
    const auto& [a, b] = merges_[rank];
    const int left = id_of(a);
    const int right = id_of(b);
    const int result = id_of({a.bytes + b.bytes, a.eow || b.eow});
    if (left < 0 || right < 0 || result < 0)
      throw DataError("codebook merge references unknown symbol at rank " +
                      std::to_string(rank));
    rules_.emplace(pack_pair(left, right),
                   MergeRule{static_cast<int>(rank), result});
  }
}

const Codebook::MergeRule* Codebook::find_rule(int left, int right) const {
  auto it = rules_.find(pack_pair(left, right));
  return it == rules_.end() ? nullptr : &it->second;
}

Codebook Codebook::from_parts(
    std::vector<std::pair<BpeSymbol, BpeSymbol>> merges,
    const std::vector<std::string>& vocab_displays) {
  Codebook book;
  book.merges_ = std::move(merges);
  if (vocab_displays.size() < 2 || !vocab_displays[0].empty() ||
      vocab_displays[1] != BpeSymbol{" ", false}.display())
    throw DataError("codebook vocab must start with UNK and whitespace");
  for (const auto& d : vocab_displays) {
    book.vocab_by_display_[d] = static_cast<int>(book.vocab_.size());
    book.vocab_.push_back(BpeSymbol::parse(d));
  }
  for (size_t rank = 0; rank < book.merges_.size(); ++rank) {
    const auto& [a, b] = book.merges_[rank];
    const int left = book.id_of(a);
    const int right = book.id_of(b);
    const int result = book.id_of({a.bytes + b.bytes, a.eow || b.eow});
    if (left < 0 || right < 0 || result < 0)
      throw DataError("codebook merge references symbol outside vocab");
    book.rules_.emplace(pack_pair(left, right),
                        MergeRule{static_cast<int>(rank), result});
  }
  return book;
}

void count_word_frequencies(std::string_view corpus, WordFreqs& freqs) {
  size_t i = 0;
  const size_t n = corpus.size();
  while (i < n) {
    while (i < n && is_word_whitespace(static_cast<unsigned char>(corpus[i])))
      ++i;
    size_t start = i;
    while (i < n && !is_word_whitespace(static_cast<unsigned char>(corpus[i])))
      ++i;
    if (i > start) ++freqs[std::string(corpus.substr(start, i - start))];
  }
}

WordFreqs count_word_frequencies(std::string_view corpus) {
  WordFreqs freqs;
  count_word_frequencies(corpus, freqs);
  return freqs;
}

namespace {

// Learner state: words as symbol-id sequences over a growing symbol table,
// with incrementally maintained weighted pair counts and a lazy max-heap.
class Learner {
public:
  explicit Learner(const WordFreqs& word_freqs) {
    auto intern_base = [&](const BpeSymbol& sym) {
      const size_t before = symbols_.size();
      const int id = intern(sym);
      if (symbols_.size() > before) base_ids_.push_back(id);
      return id;
    };
    for (const auto& [word, count] : word_freqs) {
      std::vector<int> syms;
      syms.reserve(word.size() + 1);
      for (char c : word)
        syms.push_back(intern_base({std::string(1, c), false}));
      syms.push_back(intern_base({"", true}));
      words_.push_back(std::move(syms));
      counts_.push_back(count);
    }
    for (size_t w = 0; w < words_.size(); ++w) add_word_pairs(w, +1);
  }

  void run(size_t num_merges, Codebook& out) {
    for (size_t m = 0; m < num_merges; ++m) {
      uint64_t best;
      if (!pop_best(best)) break;
      apply_merge(best);
      const int a = static_cast<int>(best >> 32);
      const int b = static_cast<int>(best & 0xffffffffu);
      out.add_merge(symbols_[a], symbols_[b]);
    }
  }

  std::vector<BpeSymbol> base_symbols() const {
    std::vector<BpeSymbol> out;
    for (int id : base_ids_) out.push_back(symbols_[id]);
    return out;
  }

private:
  struct HeapEntry {
    uint64_t count;
    uint64_t key;
  };
  struct HeapLess {
    const Learner* self;
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      if (a.count != b.count) return a.count < b.count;
      // Smaller pair wins, so it must compare greater in the max-heap.
      return self->compare_pairs(a.key, b.key) > 0;
    }
  };

  int compare_pairs(uint64_t x, uint64_t y) const {
    const int xa = static_cast<int>(x >> 32), xb = static_cast<int>(x & 0xffffffffu);
    const int ya = static_cast<int>(y >> 32), yb = static_cast<int>(y & 0xffffffffu);
    if (int c = BpeSymbol::compare(symbols_[xa], symbols_[ya])) return c;
    return BpeSymbol::compare(symbols_[xb], symbols_[yb]);
  }

  int intern(const BpeSymbol& sym) {
    const std::string key = sym.display();
    auto it = sym_ids_.find(key);
    if (it != sym_ids_.end()) return it->second;
    const int id = static_cast<int>(symbols_.size());
    sym_ids_[key] = id;
    symbols_.push_back(sym);
    return id;
  }

  void bump(uint64_t key, int64_t delta, size_t word) {
    auto& slot = pair_counts_[key];
    slot += delta;
    if (slot <= 0) {
      pair_counts_.erase(key);
      return;
    }
    // Push on every change so the heap always holds an entry matching the
    // live count; stale entries are skipped at pop time.
    heap_.push({static_cast<uint64_t>(slot), key});
    if (delta > 0) pair_words_[key].insert(word);
  }

  void add_word_pairs(size_t w, int sign) {
    const auto& syms = words_[w];
    const int64_t delta = sign * static_cast<int64_t>(counts_[w]);
    for (size_t i = 0; i + 1 < syms.size(); ++i)
      bump(pack_pair(syms[i], syms[i + 1]), delta, w);
  }

  bool pop_best(uint64_t& best) {
    while (!heap_.empty()) {
      HeapEntry top = heap_.top();
      auto it = pair_counts_.find(top.key);
      if (it == pair_counts_.end() ||
          static_cast<uint64_t>(it->second) != top.count) {
        heap_.pop();  // stale
        continue;
      }
      if (top.count < 2) return false;  // nothing worth merging
      best = top.key;
      return true;
    }
    return false;
  }

  void apply_merge(uint64_t key) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    const int merged = intern(
        {symbols_[a].bytes + symbols_[b].bytes, symbols_[a].eow || symbols_[b].eow});

    auto node = pair_words_.extract(key);
    if (node.empty()) return;
    std::vector<size_t> affected(node.mapped().begin(), node.mapped().end());
    std::sort(affected.begin(), affected.end());

    for (size_t w : affected) {
      auto& syms = words_[w];
      bool contains = false;
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        if (syms[i] == a && syms[i + 1] == b) { contains = true; break; }
      if (!contains) continue;  // stale membership

      add_word_pairs(w, -1);
      std::vector<int> rewritten;
      rewritten.reserve(syms.size());
      size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          rewritten.push_back(merged);
          i += 2;
        } else {
          rewritten.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(rewritten);
      add_word_pairs(w, +1);
    }
    pair_counts_.erase(key);
  }

  std::vector<std::vector<int>> words_;
  std::vector<uint64_t> counts_;
  std::vector<BpeSymbol> symbols_;
  std::unordered_map<std::string, int> sym_ids_;
  std::vector<int> base_ids_;
  std::unordered_map<uint64_t, int64_t> pair_counts_;
  std::unordered_map<uint64_t, std::set<size_t>> pair_words_;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapLess> heap_{
      HeapLess{this}};
};

}  // namespace

Codebook learn_codebook(const WordFreqs& word_freqs, size_t num_merges) {
  if (word_freqs.empty())
    throw std::invalid_argument("learn_codebook: empty frequency map");
  Learner learner(word_freqs);
  Codebook book;
  learner.run(num_merges, book);
  book.build_vocab(learner.base_symbols());
  return book;
}

namespace {

// Word as interned symbols. id < 0 marks a byte absent from the vocab; it
// never merges and resolves to UNK. lengths tracks covered bytes per symbol
// (the trailing eow covers zero).
struct WordSymbols {
  std::vector<int> ids;
  std::vector<size_t> lengths;
};

WordSymbols apply_merges(const Codebook& book, std::string_view word) {
  WordSymbols ws;
  ws.ids.reserve(word.size() + 1);
  for (char c : word) {
    ws.ids.push_back(book.id_of({std::string(1, c), false}));
    ws.lengths.push_back(1);
  }
  ws.ids.push_back(book.id_of({"", true}));
  ws.lengths.push_back(0);

  while (true) {
    int best_rank = -1;
    size_t best_pos = 0;
    int best_result = -1;
    for (size_t i = 0; i + 1 < ws.ids.size(); ++i) {
      if (ws.ids[i] < 0 || ws.ids[i + 1] < 0) continue;
      const auto* rule = book.find_rule(ws.ids[i], ws.ids[i + 1]);
      if (rule && (best_rank < 0 || rule->rank < best_rank)) {
        best_rank = rule->rank;
        best_pos = i;
        best_result = rule->result;
      }
    }
    if (best_rank < 0) break;
    ws.ids[best_pos] = best_result;
    ws.lengths[best_pos] += ws.lengths[best_pos + 1];
    ws.ids.erase(ws.ids.begin() + best_pos + 1);
    ws.lengths.erase(ws.lengths.begin() + best_pos + 1);
  }
  return ws;
}

}  // namespace

std::vector<std::string> segment_word(const Codebook& book,
                                      std::string_view word) {
  if (word.empty())
    throw std::invalid_argument("segment_word: empty word");
  WordSymbols ws = apply_merges(book, word);
  std::vector<std::string> out;
  size_t byte_pos = 0;
  for (size_t i = 0; i < ws.ids.size(); ++i) {
    if (ws.ids[i] >= 0) {
      out.push_back(book.symbol(ws.ids[i]).display());
    } else {
      BpeSymbol unseen{std::string(word.substr(byte_pos, ws.lengths[i])),
                       false};
      out.push_back(unseen.display());
    }
    byte_pos += ws.lengths[i];
  }
  return out;
}

Segmentation segment_bytes(const Codebook& book, std::string_view bytes) {
  Segmentation seg;
  seg.token_ids.assign(bytes.size(), Codebook::kWhitespaceId);

  size_t i = 0;
  while (i < bytes.size()) {
    if (is_word_whitespace(static_cast<unsigned char>(bytes[i]))) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < bytes.size() &&
           !is_word_whitespace(static_cast<unsigned char>(bytes[i])))
      ++i;

    WordSymbols ws = apply_merges(book, bytes.substr(start, i - start));
    size_t pos = start;
    for (size_t s = 0; s < ws.ids.size(); ++s) {
      if (ws.lengths[s] == 0) continue;  // bare eow covers no bytes
      const int id = ws.ids[s] >= 0 ? ws.ids[s] : Codebook::kUnkId;
      for (size_t p = pos; p < pos + ws.lengths[s]; ++p) seg.token_ids[p] = id;
      seg.token_spans.push_back({pos, pos + ws.lengths[s], id});
      pos += ws.lengths[s];
    }
  }
  return seg;
}

void save_codebook(const Codebook& book, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "#bpe v1 " << book.num_merges() << "\n";
  for (const auto& [a, b] : book.merges())
    out << a.display() << " " << b.display() << "\n";
  if (!out) throw DataError("write failed for " + path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty codebook file");
  size_t declared = 0;
  {
    std::istringstream hs(line);
    std::string tag, version;
    if (!(hs >> tag >> version >> declared) || tag != "#bpe" || version != "v1")
      throw DataError(path + ": bad codebook header '" + line + "'");
  }

  Codebook book;
  std::set<std::string> base_keys;
  std::vector<BpeSymbol> bases;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 >= line.size())
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 'sym1 sym2'");
    BpeSymbol a = BpeSymbol::parse(line.substr(0, space));
    BpeSymbol b = BpeSymbol::parse(line.substr(space + 1));
    for (const auto& s : {a, b}) {
      const bool is_base = (s.bytes.size() == 1 && !s.eow) ||
                           (s.bytes.empty() && s.eow);
      if (is_base && base_keys.insert(s.display()).second) bases.push_back(s);
    }
    book.add_merge(std::move(a), std::move(b));
  }
  if (book.num_merges() != declared)
    throw DataError(path + ": header declares " + std::to_string(declared) +
                    " merges, file has " + std::to_string(book.num_merges()));
  book.build_vocab(bases);
  return book;
}

}  // namespace bytener

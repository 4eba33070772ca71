#include "bytener/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bytener/rng.hpp"
#include "bytener/types.hpp"

namespace bytener {

const std::vector<float>& EmbeddingTable::lookup(
    const std::string& token) const {
  auto it = vectors.find(token);
  return it == vectors.end() ? unk : it->second;
}

EmbeddingTable load_word2vec_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  size_t count = 0, dim = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> count >> dim) || dim == 0)
      throw DataError(path + ": bad header '" + line + "'");
  }

  EmbeddingTable table;
  table.dim = dim;
  table.unk.assign(dim, 0.0f);
  size_t line_no = 1;
  size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw DataError(path + ":" + std::to_string(line_no) + ": bad row");
    std::vector<float> vec(dim);
    for (size_t d = 0; d < dim; ++d) {
      if (!(ls >> vec[d]))
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(dim) + " floats for '" +
                        token + "'");
    }
    float extra;
    if (ls >> extra)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": more than " + std::to_string(dim) + " floats for '" +
                      token + "'");
    ++rows;
    auto it = table.vectors.find(token);
    if (it != table.vectors.end()) {
      std::cerr << "warning: duplicate token '" << token << "' in " << path
                << "; last row wins\n";
      it->second = std::move(vec);
    } else {
      table.vectors.emplace(token, std::move(vec));
      table.tokens.push_back(token);
    }
  }
  if (rows != count)
    throw DataError(path + ": header declares " + std::to_string(count) +
                    " rows, file has " + std::to_string(rows));
  return table;
}

void save_word2vec_text(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << table.tokens.size() << " " << table.dim << "\n";
  char buf[64];
  for (const auto& tok : table.tokens) {
    out << tok;
    for (float v : table.vectors.at(tok)) {
      std::snprintf(buf, sizeof(buf), " %.6f", static_cast<double>(v));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed for " + path);
}

namespace {

struct Vocab {
  std::vector<std::string> tokens;
  std::vector<uint64_t> counts;
  std::unordered_map<std::string, int> ids;
  std::vector<double> neg_cdf;  // cumulative unigram^0.75

  explicit Vocab(const std::vector<std::string>& stream) {
    for (const auto& t : stream) {
      auto [it, inserted] = ids.emplace(t, static_cast<int>(tokens.size()));
      if (inserted) {
        tokens.push_back(t);
        counts.push_back(0);
      }
      ++counts[it->second];
    }
    neg_cdf.resize(tokens.size());
    double acc = 0.0;
    for (size_t i = 0; i < tokens.size(); ++i) {
      acc += std::pow(static_cast<double>(counts[i]), 0.75);
      neg_cdf[i] = acc;
    }
  }

  int sample_negative(Rng& rng) const {
    const double r = rng.uniform() * neg_cdf.back();
    auto it = std::upper_bound(neg_cdf.begin(), neg_cdf.end(), r);
    if (it == neg_cdf.end()) --it;
    return static_cast<int>(it - neg_cdf.begin());
  }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

EmbeddingTable to_table(const Vocab& vocab, const std::vector<double>& rows,
                        size_t dim) {
  EmbeddingTable table;
  table.dim = dim;
  table.unk.assign(dim, 0.0f);
  for (size_t i = 0; i < vocab.tokens.size(); ++i) {
    std::vector<float> v(dim);
    for (size_t d = 0; d < dim; ++d)
      v[d] = static_cast<float>(rows[i * dim + d]);
    table.tokens.push_back(vocab.tokens[i]);
    table.vectors.emplace(vocab.tokens[i], std::move(v));
  }
  return table;
}

double pair_loss(const std::vector<double>& centers,
                 const std::vector<double>& contexts, size_t dim,
                 const Vocab& vocab, const std::vector<int>& stream,
                 const SkipgramConfig& cfg, uint64_t eval_seed) {
  Rng rng(eval_seed);
  double total = 0.0;
  size_t pairs = 0;
  const size_t n = stream.size();
  for (size_t i = 0; i < n; ++i) {
    const int center = stream[i];
    const size_t lo = i >= cfg.window ? i - cfg.window : 0;
    const size_t hi = std::min(n - 1, i + cfg.window);
    for (size_t j = lo; j <= hi; ++j) {
      if (j == i) continue;
      const int ctx = stream[j];
      const double* v = centers.data() + static_cast<size_t>(center) * dim;
      double dot = 0.0;
      const double* u = contexts.data() + static_cast<size_t>(ctx) * dim;
      for (size_t d = 0; d < dim; ++d) dot += v[d] * u[d];
      total += -std::log(std::max(sigmoid(dot), 1e-12));
      for (size_t k = 0; k < cfg.negatives; ++k) {
        const int neg = vocab.sample_negative(rng);
        if (neg == ctx) continue;
        const double* un = contexts.data() + static_cast<size_t>(neg) * dim;
        double ndot = 0.0;
        for (size_t d = 0; d < dim; ++d) ndot += v[d] * un[d];
        total += -std::log(std::max(sigmoid(-ndot), 1e-12));
      }
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

}  // namespace

SkipgramModel train_skipgram_model(const std::vector<std::string>& tokens,
                                   const SkipgramConfig& cfg,
                                   std::vector<double>* epoch_losses) {
  Vocab vocab(tokens);
  if (vocab.tokens.size() < 2)
    throw DataError("skip-gram needs at least 2 distinct tokens");

  std::vector<int> stream(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    stream[i] = vocab.ids.at(tokens[i]);

  const size_t dim = cfg.dim;
  const size_t vocab_size = vocab.tokens.size();
  std::vector<double> centers(vocab_size * dim);
  std::vector<double> contexts(vocab_size * dim, 0.0);

  Rng init_rng(mix_seed(cfg.seed, 0x696e6974));
  const double r = 0.5 / static_cast<double>(dim);
  for (auto& x : centers) x = init_rng.uniform(-r, r);

  const uint64_t eval_seed = mix_seed(cfg.seed, 0x6576616c);
  if (epoch_losses)
    epoch_losses->push_back(
        pair_loss(centers, contexts, dim, vocab, stream, cfg, eval_seed));

  Rng rng(mix_seed(cfg.seed, 0x74726169));
  const size_t n = stream.size();
  const double total_visits =
      static_cast<double>(cfg.epochs) * static_cast<double>(n) + 1.0;
  size_t visits = 0;
  std::vector<double> grad_center(dim);

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = 0; i < n; ++i, ++visits) {
      const double progress =
          static_cast<double>(visits) / total_visits;
      const double lr =
          std::max(cfg.initial_lr * (1.0 - progress), cfg.initial_lr * 1e-4);

      const int center = stream[i];
      double* v = centers.data() + static_cast<size_t>(center) * dim;
      const size_t lo = i >= cfg.window ? i - cfg.window : 0;
      const size_t hi = std::min(n - 1, i + cfg.window);
      for (size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        std::fill(grad_center.begin(), grad_center.end(), 0.0);

        // positive pair, label 1
        {
          const int ctx = stream[j];
          double* u = contexts.data() + static_cast<size_t>(ctx) * dim;
          double dot = 0.0;
          for (size_t d = 0; d < dim; ++d) dot += v[d] * u[d];
          const double g = sigmoid(dot) - 1.0;
          for (size_t d = 0; d < dim; ++d) {
            grad_center[d] += g * u[d];
            u[d] -= lr * g * v[d];
          }
        }
        // negatives, label 0
        for (size_t k = 0; k < cfg.negatives; ++k) {
          const int neg = vocab.sample_negative(rng);
          if (neg == stream[j]) continue;
          double* u = contexts.data() + static_cast<size_t>(neg) * dim;
          double dot = 0.0;
          for (size_t d = 0; d < dim; ++d) dot += v[d] * u[d];
          const double g = sigmoid(dot);
          for (size_t d = 0; d < dim; ++d) {
            grad_center[d] += g * u[d];
            u[d] -= lr * g * v[d];
          }
        }
        for (size_t d = 0; d < dim; ++d) v[d] -= lr * grad_center[d];
      }
    }
    if (epoch_losses)
      epoch_losses->push_back(
          pair_loss(centers, contexts, dim, vocab, stream, cfg, eval_seed));
  }

  SkipgramModel model;
  model.centers = to_table(vocab, centers, dim);
  model.contexts = to_table(vocab, contexts, dim);
  return model;
}

EmbeddingTable train_skipgram(const std::vector<std::string>& tokens,
                              const SkipgramConfig& cfg) {
  return train_skipgram_model(tokens, cfg).centers;
}

double skipgram_loss(const EmbeddingTable& centers,
                     const EmbeddingTable& contexts,
                     const std::vector<std::string>& tokens,
                     const SkipgramConfig& cfg, uint64_t eval_seed) {
  Vocab vocab(tokens);
  std::vector<int> stream(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    stream[i] = vocab.ids.at(tokens[i]);
  const size_t dim = centers.dim;
  std::vector<double> c(vocab.tokens.size() * dim), x(vocab.tokens.size() * dim);
  for (size_t i = 0; i < vocab.tokens.size(); ++i) {
    const auto& cv = centers.lookup(vocab.tokens[i]);
    const auto& xv = contexts.lookup(vocab.tokens[i]);
    for (size_t d = 0; d < dim; ++d) {
      c[i * dim + d] = cv[d];
      x[i * dim + d] = xv[d];
    }
  }
  return pair_loss(c, x, dim, vocab, stream, cfg, eval_seed);
}

}  // namespace bytener

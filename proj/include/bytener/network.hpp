#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bytener/crf.hpp"
#include "bytener/eval.hpp"
#include "bytener/features.hpp"
#include "bytener/matrix.hpp"
#include "bytener/rng.hpp"
#include "bytener/tags.hpp"
#include "bytener/window.hpp"

namespace bytener {

struct NetworkDims {
  size_t byte_dim = 100;
  size_t bpe_dim = 100;
  size_t conv_layers = 20;  // projection + residual layers
  size_t conv_filters = 250;
  size_t conv_width = 7;
  size_t conv_stride = 1;
  size_t blstm_units = 250;
  size_t hidden_units = 250;
};

struct TrainConfig {
  double lr = 1e-4;
  std::string optimizer = "adam";
  size_t batch_size = 256;
  size_t epochs = 300;
  double dropout = 0.5;
  double byte_dropout = 0.3;
  double init_range = 0.05;
  uint64_t seed = 1;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global norm; 0 disables
  bool freeze_pretrained = false;
  size_t threads = 1;
  bool keep_best_dev = true;
  double early_stop_f1 = -1.0;  // stop once dev micro-F1 reaches this; <0 off
};

// All trainable state plus the metadata needed to rebuild shapes. Disabled
// feature lanes keep empty tables.
template <typename T>
struct ModelParams {
  NetworkDims dims;
  FeatureConfig features;
  std::vector<std::string> labels;
  size_t window_len = 150;
  size_t window_stride = 75;
  size_t bpe_vocab_size = 0;   // excl. PAD row
  size_t word_vocab_size = 0;  // excl. PAD row
  size_t pre_bpe_dim = 0;
  size_t pre_word_dim = 0;
  size_t num_tags_override = 0;  // downsized-test hook; 0 derives from labels

  Matrix<T> byte_embed;      // 258 x byte_dim
  Matrix<T> bpe_embed;       // (bpe_vocab+1) x bpe_dim
  Matrix<T> pre_bpe_embed;   // (bpe_vocab+1) x pre_bpe_dim
  Matrix<T> pre_word_embed;  // (word_vocab+1) x pre_word_dim

  struct Conv {
    Matrix<T> w;  // filters x (width * in_dim)
    Matrix<T> b;  // 1 x filters
  };
  std::vector<Conv> convs;

  struct Lstm {
    Matrix<T> wx;  // 4H x in_dim
    Matrix<T> wh;  // 4H x H
    Matrix<T> b;   // 1 x 4H
  };
  Lstm lstm_fwd, lstm_bwd;

  Matrix<T> hidden_w;  // hidden x 2H
  Matrix<T> hidden_b;  // 1 x hidden
  Matrix<T> emit_w;    // num_tags x hidden
  Matrix<T> emit_b;    // 1 x num_tags

  Matrix<T> crf_trans;  // K x K
  std::vector<T> crf_start, crf_end;

  size_t num_tags() const {
    return num_tags_override ? num_tags_override : 4 * labels.size() + 1;
  }

  size_t input_dim() const {
    size_t d = 0;
    if (features.use_byte_ids) d += dims.byte_dim;
    if (features.use_bpe_ids) d += dims.bpe_dim;
    if (features.use_pretrained_bpe) d += pre_bpe_dim;
    if (features.use_pretrained_word) d += pre_word_dim;
    return d;
  }

  // Visits every trainable buffer in a fixed order, including empty ones.
  template <typename Self, typename F>
  static void visit(Self& self, F&& fn) {
    fn("byte_embed", self.byte_embed.data(), self.byte_embed.size());
    fn("bpe_embed", self.bpe_embed.data(), self.bpe_embed.size());
    fn("pre_bpe_embed", self.pre_bpe_embed.data(), self.pre_bpe_embed.size());
    fn("pre_word_embed", self.pre_word_embed.data(),
       self.pre_word_embed.size());
    for (size_t l = 0; l < self.convs.size(); ++l) {
      const std::string base = "conv" + std::to_string(l);
      fn(base + ".w", self.convs[l].w.data(), self.convs[l].w.size());
      fn(base + ".b", self.convs[l].b.data(), self.convs[l].b.size());
    }
    fn("lstm_fwd.wx", self.lstm_fwd.wx.data(), self.lstm_fwd.wx.size());
    fn("lstm_fwd.wh", self.lstm_fwd.wh.data(), self.lstm_fwd.wh.size());
    fn("lstm_fwd.b", self.lstm_fwd.b.data(), self.lstm_fwd.b.size());
    fn("lstm_bwd.wx", self.lstm_bwd.wx.data(), self.lstm_bwd.wx.size());
    fn("lstm_bwd.wh", self.lstm_bwd.wh.data(), self.lstm_bwd.wh.size());
    fn("lstm_bwd.b", self.lstm_bwd.b.data(), self.lstm_bwd.b.size());
    fn("hidden.w", self.hidden_w.data(), self.hidden_w.size());
    fn("hidden.b", self.hidden_b.data(), self.hidden_b.size());
    fn("emit.w", self.emit_w.data(), self.emit_w.size());
    fn("emit.b", self.emit_b.data(), self.emit_b.size());
    fn("crf.trans", self.crf_trans.data(), self.crf_trans.size());
    fn("crf.start", self.crf_start.data(), self.crf_start.size());
    fn("crf.end", self.crf_end.data(), self.crf_end.size());
  }

  template <typename F>
  void for_each_param(F&& fn) {
    visit(*this, std::forward<F>(fn));
  }
  template <typename F>
  void for_each_param(F&& fn) const {
    visit(*this, std::forward<F>(fn));
  }

  void zero_all() {
    for_each_param([](const std::string&, T* p, size_t n) {
      std::fill(p, p + n, T(0));
    });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_param([&](const std::string&, const T* p, size_t n) {
      for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(p[i]))) ok = false;
    });
    return ok;
  }
};

struct ModelInit {
  NetworkDims dims;
  FeatureConfig features;
  std::vector<std::string> labels;
  size_t window_len = 150;
  size_t window_stride = 75;
  const Codebook* codebook = nullptr;
  const WordVocab* word_vocab = nullptr;
  const EmbeddingTable* pre_bpe = nullptr;
  const EmbeddingTable* pre_word = nullptr;
  double init_range = 0.05;
  uint64_t seed = 1;
  size_t num_tags_override = 0;
};

// Sizes every tensor from the metadata fields, which must be set. Shared by
// init and the checkpoint loader.
template <typename T>
void allocate_tensors(ModelParams<T>& p) {
  if (!p.features.any_enabled())
    throw std::invalid_argument("no feature lanes enabled");
  if (p.dims.conv_layers < 1)
    throw std::invalid_argument("need at least the projection conv layer");
  if (p.dims.conv_stride != 1)
    throw std::invalid_argument("only conv stride 1 is supported");

  if (p.features.use_byte_ids)
    p.byte_embed = Matrix<T>(kByteVocabSize, p.dims.byte_dim);
  if (p.features.use_bpe_ids)
    p.bpe_embed = Matrix<T>(p.bpe_vocab_size + 1, p.dims.bpe_dim);
  if (p.features.use_pretrained_bpe)
    p.pre_bpe_embed = Matrix<T>(p.bpe_vocab_size + 1, p.pre_bpe_dim);
  if (p.features.use_pretrained_word)
    p.pre_word_embed = Matrix<T>(p.word_vocab_size + 1, p.pre_word_dim);

  const size_t f = p.dims.conv_filters;
  const size_t w = p.dims.conv_width;
  p.convs.resize(p.dims.conv_layers);
  p.convs[0].w = Matrix<T>(f, w * p.input_dim());
  p.convs[0].b = Matrix<T>(1, f);
  for (size_t l = 1; l < p.dims.conv_layers; ++l) {
    p.convs[l].w = Matrix<T>(f, w * f);
    p.convs[l].b = Matrix<T>(1, f);
  }

  const size_t h = p.dims.blstm_units;
  for (auto* cell : {&p.lstm_fwd, &p.lstm_bwd}) {
    cell->wx = Matrix<T>(4 * h, f);
    cell->wh = Matrix<T>(4 * h, h);
    cell->b = Matrix<T>(1, 4 * h);
  }

  p.hidden_w = Matrix<T>(p.dims.hidden_units, 2 * h);
  p.hidden_b = Matrix<T>(1, p.dims.hidden_units);
  p.emit_w = Matrix<T>(p.num_tags(), p.dims.hidden_units);
  p.emit_b = Matrix<T>(1, p.num_tags());

  p.crf_trans = Matrix<T>(p.num_tags(), p.num_tags());
  p.crf_start.assign(p.num_tags(), T(0));
  p.crf_end.assign(p.num_tags(), T(0));
}

template <typename T>
ModelParams<T> allocate_params(const ModelInit& init) {
  if (init.features.needs_codebook() && !init.codebook)
    throw std::invalid_argument("BPE feature lanes need a codebook");
  if (init.features.use_pretrained_word && !init.word_vocab)
    throw std::invalid_argument("word feature lane needs a word vocabulary");

  ModelParams<T> p;
  p.dims = init.dims;
  p.features = init.features;
  p.labels = init.labels;
  p.window_len = init.window_len;
  p.window_stride = init.window_stride;
  p.num_tags_override = init.num_tags_override;

  if (init.features.needs_codebook())
    p.bpe_vocab_size = init.codebook->vocab_size();
  if (init.features.use_pretrained_word)
    p.word_vocab_size = init.word_vocab->size();
  if (init.features.use_pretrained_bpe) {
    if (!init.pre_bpe)
      throw std::invalid_argument("pretrained BPE lane needs a table");
    p.pre_bpe_dim = init.pre_bpe->dim;
  }
  if (init.features.use_pretrained_word) {
    if (!init.pre_word)
      throw std::invalid_argument("pretrained word lane needs a table");
    p.pre_word_dim = init.pre_word->dim;
  }
  allocate_tensors(p);
  return p;
}

// Shape-identical zeroed clone; gradient and optimizer buffers.
template <typename T>
ModelParams<T> allocate_like(const ModelParams<T>& src) {
  ModelParams<T> g = src;
  g.zero_all();
  return g;
}

// Random init in [-init_range, init_range] for non-pretrained tensors;
// pretrained lanes copy their source rows (fine-tunable from there).
template <typename T>
ModelParams<T> init_params(const ModelInit& init) {
  ModelParams<T> p = allocate_params<T>(init);
  Rng rng(mix_seed(init.seed, 0x101));
  const T r = static_cast<T>(init.init_range);

  p.for_each_param([&](const std::string& name, T* data, size_t n) {
    if (name == "pre_bpe_embed" || name == "pre_word_embed") return;
    for (size_t i = 0; i < n; ++i) data[i] = static_cast<T>(rng.uniform(-r, r));
  });

  if (p.features.use_pretrained_bpe) {
    for (size_t id = 0; id < p.bpe_vocab_size; ++id) {
      const auto& vec = init.pre_bpe->lookup(
          init.codebook->symbol(static_cast<int>(id)).display());
      if (vec.size() != p.pre_bpe_dim)
        throw std::invalid_argument("pretrained BPE dimension mismatch");
      for (size_t d = 0; d < p.pre_bpe_dim; ++d)
        p.pre_bpe_embed(id, d) = static_cast<T>(vec[d]);
    }
  }
  if (p.features.use_pretrained_word) {
    for (size_t id = 0; id < p.word_vocab_size; ++id) {
      const auto& vec = init.pre_word->lookup(init.word_vocab->tokens()[id]);
      if (vec.size() != p.pre_word_dim)
        throw std::invalid_argument("pretrained word dimension mismatch");
      for (size_t d = 0; d < p.pre_word_dim; ++d)
        p.pre_word_embed(id, d) = static_cast<T>(vec[d]);
    }
  }
  return p;
}

namespace netops {

template <typename T>
inline T dot(const T* a, const T* b, size_t n) {
  T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace netops

// Per-sample activations kept for the backward pass. Reused across samples
// to avoid reallocation.
template <typename T>
struct ForwardCache {
  size_t n = 0;  // true length
  Matrix<T> x1;  // L x D_in, masked input after input dropout
  Matrix<T> input_mask;
  std::vector<Matrix<T>> conv_pre;   // per layer, L x F, post-mask
  std::vector<Matrix<T>> layer_out;   // per layer, L x F, post-ReLU post-mask
  std::vector<Matrix<T>> drop_mask;  // residual layers, L x F
  Matrix<T> gates_f, gates_b;        // L x 4H, post-activation, by position
  Matrix<T> c_f, c_b;                // L x H
  Matrix<T> h_f, h_b;                // L x H
  Matrix<T> bd;                      // L x 2H, concat after dropout
  Matrix<T> bd_mask;                 // L x 2H
  Matrix<T> hid;                     // L x hidden, post-tanh
  Matrix<T> emissions;               // L x K, rows >= n zero
};

namespace detail_net {

template <typename T>
void conv_forward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b,
                  size_t width, size_t valid_rows, Matrix<T>& y,
                  std::vector<T>& xwin) {
  const size_t L = x.rows();
  const size_t d = x.cols();
  const size_t f = w.rows();
  const size_t center = width / 2;
  xwin.assign(width * d, T(0));
  y.zero();
  for (size_t t = 0; t < valid_rows; ++t) {
    for (size_t k = 0; k < width; ++k) {
      const ptrdiff_t src = static_cast<ptrdiff_t>(t + k) -
                            static_cast<ptrdiff_t>(center);
      T* dst = xwin.data() + k * d;
      if (src < 0 || src >= static_cast<ptrdiff_t>(L)) {
        std::fill(dst, dst + d, T(0));
      } else {
        const T* row = x.row(static_cast<size_t>(src));
        std::copy(row, row + d, dst);
      }
    }
    const T* bias = b.row(0);
    for (size_t o = 0; o < f; ++o)
      y(t, o) = bias[o] + netops::dot(w.row(o), xwin.data(), width * d);
  }
}

// Accumulates dw/db and the gradient w.r.t. x. dy rows >= valid_rows must be
// zero; dx rows >= valid_rows are cleared afterwards by the caller's mask.
template <typename T>
void conv_backward(const Matrix<T>& x, const Matrix<T>& w,
                   const Matrix<T>& dy, size_t width, size_t valid_rows,
                   Matrix<T>& dw, Matrix<T>& db, Matrix<T>& dx,
                   std::vector<T>& xwin, std::vector<T>& dxwin) {
  const size_t L = x.rows();
  const size_t d = x.cols();
  const size_t f = w.rows();
  const size_t center = width / 2;
  xwin.assign(width * d, T(0));
  dxwin.assign(width * d, T(0));
  dx.zero();
  for (size_t t = 0; t < valid_rows; ++t) {
    for (size_t k = 0; k < width; ++k) {
      const ptrdiff_t src = static_cast<ptrdiff_t>(t + k) -
                            static_cast<ptrdiff_t>(center);
      T* dst = xwin.data() + k * d;
      if (src < 0 || src >= static_cast<ptrdiff_t>(L)) {
        std::fill(dst, dst + d, T(0));
      } else {
        const T* row = x.row(static_cast<size_t>(src));
        std::copy(row, row + d, dst);
      }
    }
    std::fill(dxwin.begin(), dxwin.end(), T(0));
    T* dbias = db.row(0);
    for (size_t o = 0; o < f; ++o) {
      const T g = dy(t, o);
      if (g == T(0)) continue;
      netops::axpy(g, xwin.data(), dw.row(o), width * d);
      netops::axpy(g, w.row(o), dxwin.data(), width * d);
      dbias[o] += g;
    }
    for (size_t k = 0; k < width; ++k) {
      const ptrdiff_t src = static_cast<ptrdiff_t>(t + k) -
                            static_cast<ptrdiff_t>(center);
      if (src < 0 || src >= static_cast<ptrdiff_t>(L)) continue;
      netops::axpy(T(1), dxwin.data() + k * d, dx.row(static_cast<size_t>(src)),
                   d);
    }
  }
}

// One LSTM direction over positions [0, n) of x, writing per-position
// caches. forward_dir selects time order.
template <typename T>
void lstm_forward(const typename ModelParams<T>::Lstm& cell,
                  const Matrix<T>& x, size_t n, bool forward_dir,
                  Matrix<T>& gates, Matrix<T>& cseq, Matrix<T>& hseq,
                  std::vector<T>& pre) {
  const size_t h = cell.wh.cols();
  const size_t d = cell.wx.cols();
  pre.assign(4 * h, T(0));
  std::vector<T> h_prev(h, T(0)), c_prev(h, T(0));
  for (size_t step = 0; step < n; ++step) {
    const size_t pos = forward_dir ? step : n - 1 - step;
    const T* xrow = x.row(pos);
    const T* bias = cell.b.row(0);
    for (size_t u = 0; u < 4 * h; ++u)
      pre[u] = bias[u] + netops::dot(cell.wx.row(u), xrow, d) +
               netops::dot(cell.wh.row(u), h_prev.data(), h);
    T* grow = gates.row(pos);
    T* crow = cseq.row(pos);
    T* hrow = hseq.row(pos);
    for (size_t u = 0; u < h; ++u) {
      const T ig = netops::sigmoid(pre[u]);
      const T fg = netops::sigmoid(pre[h + u]);
      const T gg = std::tanh(pre[2 * h + u]);
      const T og = netops::sigmoid(pre[3 * h + u]);
      grow[u] = ig;
      grow[h + u] = fg;
      grow[2 * h + u] = gg;
      grow[3 * h + u] = og;
      crow[u] = fg * c_prev[u] + ig * gg;
      hrow[u] = og * std::tanh(crow[u]);
    }
    std::copy(crow, crow + h, c_prev.data());
    std::copy(hrow, hrow + h, h_prev.data());
  }
}

// dh_seq holds dLoss/dh per position; accumulates weight grads and dx.
template <typename T>
void lstm_backward(const typename ModelParams<T>::Lstm& cell,
                   const Matrix<T>& x, size_t n, bool forward_dir,
                   const Matrix<T>& gates, const Matrix<T>& cseq,
                   const Matrix<T>& hseq, const Matrix<T>& dh_seq,
                   typename ModelParams<T>::Lstm& grad, Matrix<T>& dx) {
  const size_t h = cell.wh.cols();
  const size_t d = cell.wx.cols();
  std::vector<T> dh(h, T(0)), dc(h, T(0)), dpre(4 * h, T(0));
  for (size_t step = n; step-- > 0;) {
    const size_t pos = forward_dir ? step : n - 1 - step;
    const size_t prev_pos = forward_dir ? pos - 1 : pos + 1;
    const bool has_prev = forward_dir ? pos > 0 : pos + 1 < n;

    const T* grow = gates.row(pos);
    const T* crow = cseq.row(pos);
    for (size_t u = 0; u < h; ++u) dh[u] += dh_seq(pos, u);

    for (size_t u = 0; u < h; ++u) {
      const T ig = grow[u], fg = grow[h + u], gg = grow[2 * h + u],
              og = grow[3 * h + u];
      const T tc = std::tanh(crow[u]);
      const T dog = dh[u] * tc;
      const T dcu = dc[u] + dh[u] * og * (T(1) - tc * tc);
      const T c_prev = has_prev ? cseq(prev_pos, u) : T(0);
      const T dig = dcu * gg;
      const T dfg = dcu * c_prev;
      const T dgg = dcu * ig;
      dpre[u] = dig * ig * (T(1) - ig);
      dpre[h + u] = dfg * fg * (T(1) - fg);
      dpre[2 * h + u] = dgg * (T(1) - gg * gg);
      dpre[3 * h + u] = dog * og * (T(1) - og);
      dc[u] = dcu * fg;
    }

    const T* xrow = x.row(pos);
    const T* hprev = has_prev ? hseq.row(prev_pos) : nullptr;
    T* gb = grad.b.row(0);
    std::fill(dh.begin(), dh.end(), T(0));
    for (size_t u = 0; u < 4 * h; ++u) {
      const T g = dpre[u];
      if (g == T(0)) continue;
      netops::axpy(g, xrow, grad.wx.row(u), d);
      if (hprev) {
        netops::axpy(g, hprev, grad.wh.row(u), h);
        netops::axpy(g, cell.wh.row(u), dh.data(), h);
      }
      gb[u] += g;
      netops::axpy(g, cell.wx.row(u), dx.row(pos), d);
    }
  }
}

template <typename T>
void apply_dropout(Matrix<T>& x, Matrix<T>& mask, size_t rows, double rate,
                   Rng& rng) {
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (size_t t = 0; t < rows; ++t) {
    T* mrow = mask.row(t);
    T* xrow = x.row(t);
    for (size_t c = 0; c < x.cols(); ++c) {
      mrow[c] = rng.uniform() < rate ? T(0) : keep_scale;
      xrow[c] *= mrow[c];
    }
  }
}

}  // namespace detail_net

// Embedding concat -> input dropout -> projection conv (ReLU) -> residual
// conv blocks -> BLSTM over the true length -> dropout -> tanh hidden ->
// linear emissions. Dropout applies only in train mode; PAD positions carry
// zeros throughout, so emission rows at and beyond the true length are zero.
template <typename T>
void forward_pass(const ModelParams<T>& p, const FeatureIds& ids,
                  bool train_mode, double dropout_rate, uint64_t dropout_seed,
                  ForwardCache<T>& cache) {
  const size_t L = p.window_len;
  const size_t n = ids.length;
  const size_t d_in = p.input_dim();
  const size_t f = p.dims.conv_filters;
  const size_t h = p.dims.blstm_units;
  const size_t hid_units = p.dims.hidden_units;
  const size_t k = p.num_tags();
  const size_t layers = p.dims.conv_layers;
  const bool drop = train_mode && dropout_rate > 0.0;

  if (n > L) throw std::invalid_argument("sample longer than the window");
  if ((p.features.use_byte_ids && ids.byte_ids.size() != L) ||
      (p.features.needs_codebook() && ids.bpe_ids.size() != L) ||
      (p.features.use_pretrained_word && ids.word_ids.size() != L))
    throw std::invalid_argument("feature lanes not padded to the window");

  cache.n = n;
  cache.x1 = Matrix<T>(L, d_in);
  cache.conv_pre.assign(layers, Matrix<T>(L, f));
  cache.layer_out.assign(layers, Matrix<T>(L, f));
  cache.drop_mask.assign(drop ? layers : 0, Matrix<T>(L, f));
  if (drop) cache.input_mask = Matrix<T>(L, d_in);
  cache.gates_f = Matrix<T>(L, 4 * h);
  cache.gates_b = Matrix<T>(L, 4 * h);
  cache.c_f = Matrix<T>(L, h);
  cache.c_b = Matrix<T>(L, h);
  cache.h_f = Matrix<T>(L, h);
  cache.h_b = Matrix<T>(L, h);
  cache.bd = Matrix<T>(L, 2 * h);
  if (drop) cache.bd_mask = Matrix<T>(L, 2 * h);
  cache.hid = Matrix<T>(L, hid_units);
  cache.emissions = Matrix<T>(L, k);

  Rng rng(mix_seed(dropout_seed, 0xd70));

  // embedding concat, masked to the true length
  for (size_t t = 0; t < n; ++t) {
    T* row = cache.x1.row(t);
    size_t off = 0;
    if (p.features.use_byte_ids) {
      const T* e = p.byte_embed.row(ids.byte_ids[t]);
      std::copy(e, e + p.dims.byte_dim, row + off);
      off += p.dims.byte_dim;
    }
    if (p.features.use_bpe_ids) {
      const T* e = p.bpe_embed.row(ids.bpe_ids[t]);
      std::copy(e, e + p.dims.bpe_dim, row + off);
      off += p.dims.bpe_dim;
    }
    if (p.features.use_pretrained_bpe) {
      const T* e = p.pre_bpe_embed.row(ids.bpe_ids[t]);
      std::copy(e, e + p.pre_bpe_dim, row + off);
      off += p.pre_bpe_dim;
    }
    if (p.features.use_pretrained_word) {
      const T* e = p.pre_word_embed.row(ids.word_ids[t]);
      std::copy(e, e + p.pre_word_dim, row + off);
      off += p.pre_word_dim;
    }
  }
  if (drop) detail_net::apply_dropout(cache.x1, cache.input_mask, n,
                                      dropout_rate, rng);

  // projection conv + ReLU
  std::vector<T> xwin;
  detail_net::conv_forward(cache.x1, p.convs[0].w, p.convs[0].b,
                           p.dims.conv_width, n, cache.conv_pre[0], xwin);
  for (size_t t = 0; t < n; ++t)
    for (size_t c = 0; c < f; ++c)
      cache.layer_out[0](t, c) = std::max(cache.conv_pre[0](t, c), T(0));

  // residual blocks: x <- x + dropout(ReLU(conv(x)))
  const Matrix<T>* prev = &cache.layer_out[0];
  for (size_t l = 1; l < layers; ++l) {
    detail_net::conv_forward(*prev, p.convs[l].w, p.convs[l].b,
                             p.dims.conv_width, n, cache.conv_pre[l], xwin);
    Matrix<T>& out = cache.layer_out[l];
    for (size_t t = 0; t < n; ++t)
      for (size_t c = 0; c < f; ++c)
        out(t, c) = std::max(cache.conv_pre[l](t, c), T(0));
    if (drop)
      detail_net::apply_dropout(out, cache.drop_mask[l], n, dropout_rate, rng);
    for (size_t t = 0; t < n; ++t)
      netops::axpy(T(1), prev->row(t), out.row(t), f);
    prev = &out;
  }

  // BLSTM over the true length
  std::vector<T> pre;
  detail_net::lstm_forward<T>(p.lstm_fwd, *prev, n, true, cache.gates_f,
                              cache.c_f, cache.h_f, pre);
  detail_net::lstm_forward<T>(p.lstm_bwd, *prev, n, false, cache.gates_b,
                              cache.c_b, cache.h_b, pre);
  for (size_t t = 0; t < n; ++t) {
    std::copy(cache.h_f.row(t), cache.h_f.row(t) + h, cache.bd.row(t));
    std::copy(cache.h_b.row(t), cache.h_b.row(t) + h, cache.bd.row(t) + h);
  }
  if (drop)
    detail_net::apply_dropout(cache.bd, cache.bd_mask, n, dropout_rate, rng);

  // hidden tanh + linear emissions
  for (size_t t = 0; t < n; ++t) {
    const T* brow = cache.bd.row(t);
    T* hidrow = cache.hid.row(t);
    for (size_t u = 0; u < hid_units; ++u)
      hidrow[u] = std::tanh(p.hidden_b(0, u) +
                            netops::dot(p.hidden_w.row(u), brow, 2 * h));
    T* erow = cache.emissions.row(t);
    for (size_t y = 0; y < k; ++y)
      erow[y] = p.emit_b(0, y) + netops::dot(p.emit_w.row(y), hidrow, hid_units);
  }

  for (size_t t = 0; t < n; ++t)
    for (size_t y = 0; y < k; ++y)
      if (!std::isfinite(static_cast<double>(cache.emissions(t, y))))
        throw DivergenceError("non-finite emission score");
}

template <typename T>
Matrix<T> emissions_forward(const ModelParams<T>& p, const FeatureIds& ids,
                            bool train_mode, double dropout_rate = 0.0,
                            uint64_t dropout_seed = 0) {
  ForwardCache<T> cache;
  forward_pass(p, ids, train_mode, dropout_rate, dropout_seed, cache);
  return cache.emissions;
}

// CRF NLL of one sample; when grads is non-null, accumulates dLoss/dParams
// for every tensor (adds on top of existing values).
template <typename T>
T sample_loss(const ModelParams<T>& p, const FeatureIds& ids,
              const TagSequence& gold, bool train_mode, double dropout_rate,
              uint64_t dropout_seed, ModelParams<T>* grads,
              ForwardCache<T>& cache) {
  forward_pass(p, ids, train_mode, dropout_rate, dropout_seed, cache);
  const size_t n = ids.length;
  const size_t k = p.num_tags();

  CrfGrads<T> crf_grads;
  const T nll = crf_neg_log_likelihood(cache.emissions, gold, p.crf_trans,
                                       p.crf_start, p.crf_end, n,
                                       grads ? &crf_grads : nullptr);
  if (!grads) return nll;

  for (size_t a = 0; a < k; ++a) {
    grads->crf_start[a] += crf_grads.start[a];
    grads->crf_end[a] += crf_grads.end[a];
    netops::axpy(T(1), crf_grads.trans.row(a), grads->crf_trans.row(a), k);
  }

  const size_t f = p.dims.conv_filters;
  const size_t h = p.dims.blstm_units;
  const size_t hid_units = p.dims.hidden_units;
  const size_t layers = p.dims.conv_layers;
  const bool drop = train_mode && dropout_rate > 0.0;

  // emissions -> hidden -> BLSTM output
  Matrix<T> dbd(p.window_len, 2 * h);
  std::vector<T> dhid(hid_units);
  for (size_t t = 0; t < n; ++t) {
    const T* de = crf_grads.emissions.row(t);
    std::fill(dhid.begin(), dhid.end(), T(0));
    for (size_t y = 0; y < k; ++y) {
      const T g = de[y];
      if (g == T(0)) continue;
      netops::axpy(g, p.emit_w.row(y), dhid.data(), hid_units);
      grads->emit_b(0, y) += g;
      netops::axpy(g, cache.hid.row(t), grads->emit_w.row(y), hid_units);
    }
    const T* hidrow = cache.hid.row(t);
    const T* brow = cache.bd.row(t);
    T* dbrow = dbd.row(t);
    for (size_t u = 0; u < hid_units; ++u) {
      const T dpre = dhid[u] * (T(1) - hidrow[u] * hidrow[u]);
      if (dpre == T(0)) continue;
      grads->hidden_b(0, u) += dpre;
      netops::axpy(dpre, brow, grads->hidden_w.row(u), 2 * h);
      netops::axpy(dpre, p.hidden_w.row(u), dbrow, 2 * h);
    }
    if (drop) {
      const T* mrow = cache.bd_mask.row(t);
      for (size_t c = 0; c < 2 * h; ++c) dbrow[c] *= mrow[c];
    }
  }

  // BLSTM backward into the conv stack output
  const Matrix<T>& conv_top = cache.layer_out[layers - 1];
  Matrix<T> dh_f(p.window_len, h), dh_b(p.window_len, h);
  for (size_t t = 0; t < n; ++t) {
    std::copy(dbd.row(t), dbd.row(t) + h, dh_f.row(t));
    std::copy(dbd.row(t) + h, dbd.row(t) + 2 * h, dh_b.row(t));
  }
  Matrix<T> dconv(p.window_len, f);
  dconv.zero();
  detail_net::lstm_backward<T>(p.lstm_fwd, conv_top, n, true, cache.gates_f,
                               cache.c_f, cache.h_f, dh_f, grads->lstm_fwd,
                               dconv);
  detail_net::lstm_backward<T>(p.lstm_bwd, conv_top, n, false, cache.gates_b,
                               cache.c_b, cache.h_b, dh_b, grads->lstm_bwd,
                               dconv);

  // residual conv stack backward
  std::vector<T> xwin, dxwin;
  Matrix<T> dbranch(p.window_len, f);
  Matrix<T> dxlower(p.window_len, f);
  for (size_t l = layers; l-- > 1;) {
    // dconv = gradient at this block's output
    for (size_t t = 0; t < n; ++t) {
      const T* drow = dconv.row(t);
      T* brow = dbranch.row(t);
      const T* mrow = drop ? cache.drop_mask[l].row(t) : nullptr;
      const T* zrow = cache.conv_pre[l].row(t);
      for (size_t c = 0; c < f; ++c) {
        T g = drow[c];
        if (mrow) g *= mrow[c];
        brow[c] = zrow[c] > T(0) ? g : T(0);
      }
    }
    const Matrix<T>& input = cache.layer_out[l - 1];
    detail_net::conv_backward(input, p.convs[l].w, dbranch, p.dims.conv_width,
                              n, grads->convs[l].w, grads->convs[l].b, dxlower,
                              xwin, dxwin);
    // identity skip: add branch-input grads onto the running gradient
    for (size_t t = 0; t < n; ++t)
      netops::axpy(T(1), dxlower.row(t), dconv.row(t), f);
  }

  // projection layer
  Matrix<T> dproj(p.window_len, f);
  for (size_t t = 0; t < n; ++t) {
    const T* drow = dconv.row(t);
    T* prow = dproj.row(t);
    const T* zrow = cache.conv_pre[0].row(t);
    for (size_t c = 0; c < f; ++c)
      prow[c] = zrow[c] > T(0) ? drow[c] : T(0);
  }
  Matrix<T> dx1(p.window_len, p.input_dim());
  detail_net::conv_backward(cache.x1, p.convs[0].w, dproj, p.dims.conv_width,
                            n, grads->convs[0].w, grads->convs[0].b, dx1, xwin,
                            dxwin);

  // input dropout, then scatter into embedding tables
  for (size_t t = 0; t < n; ++t) {
    T* row = dx1.row(t);
    if (drop) {
      const T* mrow = cache.input_mask.row(t);
      for (size_t c = 0; c < p.input_dim(); ++c) row[c] *= mrow[c];
    }
    size_t off = 0;
    if (p.features.use_byte_ids) {
      netops::axpy(T(1), row + off, grads->byte_embed.row(ids.byte_ids[t]),
                   p.dims.byte_dim);
      off += p.dims.byte_dim;
    }
    if (p.features.use_bpe_ids) {
      netops::axpy(T(1), row + off, grads->bpe_embed.row(ids.bpe_ids[t]),
                   p.dims.bpe_dim);
      off += p.dims.bpe_dim;
    }
    if (p.features.use_pretrained_bpe) {
      netops::axpy(T(1), row + off, grads->pre_bpe_embed.row(ids.bpe_ids[t]),
                   p.pre_bpe_dim);
      off += p.pre_bpe_dim;
    }
    if (p.features.use_pretrained_word) {
      netops::axpy(T(1), row + off, grads->pre_word_embed.row(ids.word_ids[t]),
                   p.pre_word_dim);
      off += p.pre_word_dim;
    }
  }
  return nll;
}

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  size_t t = 0;
};

// Standard Adam with bias correction over every trainable tensor; optionally
// skips the pretrained lanes when they are frozen.
template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads,
               AdamState<T>& state, const TrainConfig& cfg) {
  std::vector<std::pair<T*, size_t>> pt;
  std::vector<std::pair<const T*, size_t>> gt;
  std::vector<std::string> names;
  params.for_each_param([&](const std::string& name, T* d, size_t n) {
    pt.emplace_back(d, n);
    names.push_back(name);
  });
  grads.for_each_param(
      [&](const std::string&, const T* d, size_t n) { gt.emplace_back(d, n); });

  if (state.m.empty()) {
    state.m.resize(pt.size());
    state.v.resize(pt.size());
    for (size_t i = 0; i < pt.size(); ++i) {
      state.m[i].assign(pt[i].second, T(0));
      state.v[i].assign(pt[i].second, T(0));
    }
  }

  ++state.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));

  for (size_t i = 0; i < pt.size(); ++i) {
    if (cfg.freeze_pretrained &&
        (names[i] == "pre_bpe_embed" || names[i] == "pre_word_embed"))
      continue;
    T* p = pt[i].first;
    const T* g = gt[i].first;
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (size_t j = 0; j < pt[i].second; ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) -
                            cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
  if (!params.all_finite())
    throw DivergenceError("non-finite parameter after Adam update");
}

// Inference for one document: windows -> emissions -> Viterbi -> stitch.
template <typename T>
TagSequence predict_document_tags(const ModelParams<T>& p, const Document& doc,
                                  const WindowConfig& wcfg,
                                  const Codebook* codebook,
                                  const WordVocab* word_vocab,
                                  ForwardCache<T>& cache) {
  std::vector<std::pair<size_t, TagSequence>> window_tags;
  for (const Sample& s : extract_inference_windows(doc, wcfg)) {
    const FeatureIds ids =
        assemble_feature_ids(s, p.features, codebook, word_vocab, p.window_len);
    forward_pass(p, ids, /*train_mode=*/false, 0.0, 0, cache);
    TagSequence tags = viterbi_decode(cache.emissions, p.crf_trans, p.crf_start,
                                      p.crf_end, ids.length);
    window_tags.emplace_back(s.doc_offset, std::move(tags));
  }
  return recombine_window_tags(doc.bytes.size(), window_tags);
}

template <typename T>
std::vector<DocPrediction> predict(const ModelParams<T>& p,
                                   const Dataset& dataset,
                                   const WindowConfig& wcfg,
                                   const Codebook* codebook,
                                   const WordVocab* word_vocab) {
  const TagScheme scheme(p.labels);
  std::vector<DocPrediction> out;
  out.reserve(dataset.documents.size());
  ForwardCache<T> cache;
  for (const auto& doc : dataset.documents) {
    DocPrediction pred;
    pred.doc_id = doc.doc_id;
    if (!doc.bytes.empty()) {
      const TagSequence tags =
          predict_document_tags(p, doc, wcfg, codebook, word_vocab, cache);
      pred.spans = decode_iobes(tags, scheme);
    }
    out.push_back(std::move(pred));
  }
  return out;
}

struct EpochLog {
  size_t epoch = 0;
  double mean_loss = 0.0;
  double dev_f1 = -1.0;  // -1 when no dev set
};

template <typename T>
struct TrainResult {
  ModelParams<T> params;     // final (or best-dev when tracked)
  std::vector<EpochLog> log;
  size_t best_epoch = 0;
  double best_dev_f1 = -1.0;
};

// Mini-batch training: seeded shuffle per epoch, byte-dropout, mean
// per-sequence CRF NLL, Adam. Logs epoch loss and dev micro-F1 (dev windows
// are recombined into documents before scoring).
template <typename T>
TrainResult<T> train(const std::vector<Sample>& train_samples,
                     const Dataset& dev_docs, const TrainConfig& cfg,
                     const FeatureConfig& features, const WindowConfig& wcfg,
                     ModelParams<T> params, const Codebook* codebook,
                     const WordVocab* word_vocab) {
  if (train_samples.empty())
    throw std::invalid_argument("train: no training samples");
  if (!(features == params.features))
    throw std::invalid_argument("feature config does not match the model");

  // Feature lanes are deterministic per sample; assemble once.
  std::vector<FeatureIds> feats;
  feats.reserve(train_samples.size());
  for (const auto& s : train_samples)
    feats.push_back(assemble_feature_ids(s, features, codebook, word_vocab,
                                         params.window_len));

  TrainResult<T> result;
  result.params = params;
  AdamState<T> adam;

  const size_t n_samples = train_samples.size();
  std::vector<size_t> order(n_samples);
  for (size_t i = 0; i < n_samples; ++i) order[i] = i;

  const size_t threads = std::max<size_t>(1, cfg.threads);
  std::vector<ModelParams<T>> thread_grads;
  for (size_t i = 0; i < threads; ++i)
    thread_grads.push_back(allocate_like(params));

  const uint64_t byte_drop_seed = mix_seed(cfg.seed, 0xb17ed);
  const uint64_t drop_seed = mix_seed(cfg.seed, 0xd40);
  uint64_t sample_counter = 0;
  const auto gold_dev = gold_of(dev_docs);

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5000 + epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t epoch_count = 0;

    for (size_t batch_start = 0; batch_start < n_samples;
         batch_start += cfg.batch_size) {
      const size_t batch_end =
          std::min(n_samples, batch_start + cfg.batch_size);
      const size_t batch_count = batch_end - batch_start;

      for (auto& g : thread_grads) g.zero_all();
      std::vector<double> losses(batch_count, 0.0);
      const uint64_t counter_base = sample_counter;
      sample_counter += batch_count;

      auto worker = [&](size_t tid) {
        ForwardCache<T> cache;
        for (size_t b = tid; b < batch_count; b += threads) {
          const size_t idx = order[batch_start + b];
          const uint64_t ctr = counter_base + b;
          FeatureIds ids = feats[idx];
          if (cfg.byte_dropout > 0.0 && features.use_byte_ids)
            ids = apply_byte_dropout(std::move(ids), cfg.byte_dropout,
                                     mix_seed(byte_drop_seed, ctr));
          losses[b] = static_cast<double>(sample_loss(
              params, ids, train_samples[idx].tags, /*train_mode=*/true,
              cfg.dropout, mix_seed(drop_seed, ctr), &thread_grads[tid],
              cache));
        }
      };
      if (threads == 1) {
        worker(0);
      } else {
        std::vector<std::thread> pool;
        for (size_t tid = 0; tid < threads; ++tid)
          pool.emplace_back(worker, tid);
        for (auto& th : pool) th.join();
      }

      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite training loss");
      epoch_loss += batch_loss;
      epoch_count += batch_count;

      // reduce thread buffers in thread order, scale to the batch mean
      ModelParams<T>& grads = thread_grads[0];
      for (size_t tid = 1; tid < threads; ++tid) {
        std::vector<std::pair<const T*, size_t>> src;
        thread_grads[tid].for_each_param(
            [&](const std::string&, const T* d, size_t n) {
              src.emplace_back(d, n);
            });
        size_t i = 0;
        grads.for_each_param([&](const std::string&, T* d, size_t n) {
          netops::axpy(T(1), src[i].first, d, n);
          ++i;
        });
      }
      const T scale = static_cast<T>(1.0 / static_cast<double>(batch_count));
      grads.for_each_param([&](const std::string&, T* d, size_t n) {
        for (size_t j = 0; j < n; ++j) d[j] *= scale;
      });

      bool grads_finite = true;
      grads.for_each_param([&](const std::string&, const T* d, size_t n) {
        for (size_t j = 0; j < n; ++j)
          if (!std::isfinite(static_cast<double>(d[j]))) grads_finite = false;
      });
      if (!grads_finite) {
        std::cerr << "warning: non-finite gradient, batch skipped (epoch "
                  << epoch << ")\n";
        continue;
      }

      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        grads.for_each_param([&](const std::string&, const T* d, size_t n) {
          for (size_t j = 0; j < n; ++j)
            sq += static_cast<double>(d[j]) * static_cast<double>(d[j]);
        });
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          const T s = static_cast<T>(cfg.grad_clip / norm);
          grads.for_each_param([&](const std::string&, T* d, size_t n) {
            for (size_t j = 0; j < n; ++j) d[j] *= s;
          });
        }
      }

      adam_step(params, grads, adam, cfg);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = epoch_count ? epoch_loss / epoch_count : 0.0;

    if (!dev_docs.documents.empty()) {
      const auto preds = predict(params, dev_docs, wcfg, codebook, word_vocab);
      entry.dev_f1 = score(gold_dev, preds).micro.f1;
      if (entry.dev_f1 > result.best_dev_f1) {
        result.best_dev_f1 = entry.dev_f1;
        result.best_epoch = epoch;
        if (cfg.keep_best_dev) result.params = params;
      }
    }
    result.log.push_back(entry);

    if (cfg.early_stop_f1 >= 0.0 && entry.dev_f1 >= cfg.early_stop_f1) break;
  }

  if (!cfg.keep_best_dev || dev_docs.documents.empty()) result.params = params;
  return result;
}

}  // namespace bytener

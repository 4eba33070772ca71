#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

#include "bytener/matrix.hpp"
#include "bytener/tags.hpp"

namespace bytener {

// Linear-chain CRF scoring over per-position emissions with tag-transition
// scores plus explicit start/end vectors. Path score of y[0..L):
//   start[y0] + sum_t emissions(t, y_t) + sum_t trans(y_t, y_{t+1}) + end[yL].
// All computation is in log space.

namespace detail {

template <typename T>
T log_sum_exp(const T* xs, size_t n) {
  T m = xs[0];
  for (size_t i = 1; i < n; ++i) m = std::max(m, xs[i]);
  if (!std::isfinite(static_cast<double>(m))) return m;
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += std::exp(xs[i] - m);
  return m + std::log(acc);
}

}  // namespace detail

// emissions: length x num_tags (rows beyond length are ignored).
template <typename T>
T crf_log_partition(const Matrix<T>& emissions, const Matrix<T>& trans,
                    const std::vector<T>& start, const std::vector<T>& end,
                    size_t length) {
  assert(length >= 1 && length <= emissions.rows());
  const size_t k = trans.rows();
  std::vector<T> alpha(k), next(k), work(k);
  for (size_t y = 0; y < k; ++y) alpha[y] = start[y] + emissions(0, y);
  for (size_t t = 1; t < length; ++t) {
    for (size_t y = 0; y < k; ++y) {
      for (size_t p = 0; p < k; ++p) work[p] = alpha[p] + trans(p, y);
      next[y] = detail::log_sum_exp(work.data(), k) + emissions(t, y);
    }
    alpha.swap(next);
  }
  for (size_t y = 0; y < k; ++y) alpha[y] += end[y];
  return detail::log_sum_exp(alpha.data(), k);
}

template <typename T>
T crf_gold_score(const Matrix<T>& emissions, const Matrix<T>& trans,
                 const std::vector<T>& start, const std::vector<T>& end,
                 const TagSequence& gold, size_t length) {
  T score = start[gold[0]] + emissions(0, gold[0]);
  for (size_t t = 1; t < length; ++t)
    score += trans(gold[t - 1], gold[t]) + emissions(t, gold[t]);
  score += end[gold[length - 1]];
  return score;
}

// Gradients of the NLL with respect to every CRF input; emission gradient
// rows beyond length stay zero.
template <typename T>
struct CrfGrads {
  Matrix<T> emissions;
  Matrix<T> trans;
  std::vector<T> start;
  std::vector<T> end;
};

// NLL = logZ - gold score, >= 0. Gradients are posterior marginals minus
// gold indicators, from the forward-backward recursions.
template <typename T>
T crf_neg_log_likelihood(const Matrix<T>& emissions, const TagSequence& gold,
                         const Matrix<T>& trans, const std::vector<T>& start,
                         const std::vector<T>& end, size_t length,
                         CrfGrads<T>* grads = nullptr) {
  assert(length >= 1 && gold.size() >= length);
  const size_t k = trans.rows();

  // forward
  Matrix<T> alpha(length, k);
  std::vector<T> work(k);
  for (size_t y = 0; y < k; ++y) alpha(0, y) = start[y] + emissions(0, y);
  for (size_t t = 1; t < length; ++t) {
    for (size_t y = 0; y < k; ++y) {
      for (size_t p = 0; p < k; ++p) work[p] = alpha(t - 1, p) + trans(p, y);
      alpha(t, y) = detail::log_sum_exp(work.data(), k) + emissions(t, y);
    }
  }
  for (size_t y = 0; y < k; ++y) work[y] = alpha(length - 1, y) + end[y];
  const T log_z = detail::log_sum_exp(work.data(), k);

  const T gold_score =
      crf_gold_score(emissions, trans, start, end, gold, length);
  const T nll = log_z - gold_score;
  if (!grads) return nll;

  // backward
  Matrix<T> beta(length, k);
  for (size_t y = 0; y < k; ++y) beta(length - 1, y) = end[y];
  for (size_t t = length - 1; t-- > 0;) {
    for (size_t y = 0; y < k; ++y) {
      for (size_t nxt = 0; nxt < k; ++nxt)
        work[nxt] = trans(y, nxt) + emissions(t + 1, nxt) + beta(t + 1, nxt);
      beta(t, y) = detail::log_sum_exp(work.data(), k);
    }
  }

  grads->emissions = Matrix<T>(emissions.rows(), k);
  grads->trans = Matrix<T>(k, k);
  grads->start.assign(k, T(0));
  grads->end.assign(k, T(0));

  // unary marginals
  for (size_t t = 0; t < length; ++t)
    for (size_t y = 0; y < k; ++y)
      grads->emissions(t, y) = std::exp(alpha(t, y) + beta(t, y) - log_z);

  // pairwise marginals
  for (size_t t = 0; t + 1 < length; ++t)
    for (size_t a = 0; a < k; ++a)
      for (size_t b = 0; b < k; ++b)
        grads->trans(a, b) +=
            std::exp(alpha(t, a) + trans(a, b) + emissions(t + 1, b) +
                     beta(t + 1, b) - log_z);

  for (size_t y = 0; y < k; ++y) {
    grads->start[y] = std::exp(start[y] + emissions(0, y) + beta(0, y) - log_z);
    grads->end[y] = std::exp(alpha(length - 1, y) + end[y] - log_z);
  }

  // subtract gold indicators
  for (size_t t = 0; t < length; ++t) grads->emissions(t, gold[t]) -= T(1);
  for (size_t t = 0; t + 1 < length; ++t)
    grads->trans(gold[t], gold[t + 1]) -= T(1);
  grads->start[gold[0]] -= T(1);
  grads->end[gold[length - 1]] -= T(1);
  return nll;
}

// Max-scoring path; backpointer ties resolve toward the lowest tag id, so an
// all-zero instance decodes to all-O.
template <typename T>
TagSequence viterbi_decode(const Matrix<T>& emissions, const Matrix<T>& trans,
                           const std::vector<T>& start,
                           const std::vector<T>& end, size_t length) {
  assert(length >= 1 && length <= emissions.rows());
  const size_t k = trans.rows();
  Matrix<T> score(length, k);
  Matrix<int> back(length, k);
  for (size_t y = 0; y < k; ++y) score(0, y) = start[y] + emissions(0, y);
  for (size_t t = 1; t < length; ++t) {
    for (size_t y = 0; y < k; ++y) {
      T best = score(t - 1, 0) + trans(0, y);
      int arg = 0;
      for (size_t p = 1; p < k; ++p) {
        const T s = score(t - 1, p) + trans(p, y);
        if (s > best) {
          best = s;
          arg = static_cast<int>(p);
        }
      }
      score(t, y) = best + emissions(t, y);
      back(t, y) = arg;
    }
  }
  size_t last = 0;
  T best = score(length - 1, 0) + end[0];
  for (size_t y = 1; y < k; ++y) {
    const T s = score(length - 1, y) + end[y];
    if (s > best) {
      best = s;
      last = y;
    }
  }
  TagSequence path(length);
  path[length - 1] = static_cast<int>(last);
  for (size_t t = length - 1; t > 0; --t)
    path[t - 1] = back(t, path[t]);
  return path;
}

}  // namespace bytener

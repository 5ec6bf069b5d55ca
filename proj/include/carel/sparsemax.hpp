#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "carel/types.hpp"

namespace carel {

/// Euclidean projection of v onto the probability simplex.
inline Vector sparsemax(const Vector& v) {
  if (v.size() < 1) throw DomainError("sparsemax: empty input");
  if (!v.allFinite()) throw DomainError("sparsemax: non-finite input");
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double tau_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumsum += sorted[k];
    if (1.0 + static_cast<double>(k + 1) * sorted[k] > cumsum) {
      support = k + 1;
      tau_sum = cumsum;
    }
  }
  const double tau = (tau_sum - 1.0) / static_cast<double>(support);
  return (v.array() - tau).max(0.0).matrix();
}

/// Vector-Jacobian product of sparsemax at output p: restricted to the
/// support S, d_in = d_out - mean_S(d_out); zero elsewhere.
inline Vector sparsemax_backward(const Vector& p, const Vector& d_out) {
  double acc = 0.0;
  int support = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      acc += d_out[i];
      ++support;
    }
  }
  const double avg = support > 0 ? acc / support : 0.0;
  Vector d_in = Vector::Zero(p.size());
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) d_in[i] = d_out[i] - avg;
  return d_in;
}

/// Single-query sparsemax attention: keys and values are the rows of
/// `states` (one row when the encoder exposes only a pooled vector).
inline Vector adapter_attend(const Matrix& states, const Vector& query) {
  if (states.rows() < 1) throw DomainError("adapter_attend: no states");
  if (states.cols() != query.size()) throw DomainError("adapter_attend: query dimension mismatch");
  const Vector scores = (states * query) / std::sqrt(static_cast<double>(query.size()));
  const Vector w = sparsemax(scores);
  return states.transpose() * w;
}

}  // namespace carel

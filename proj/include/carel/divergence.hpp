#pragma once

// Divergence estimators between diagonal Gaussians and between sample
// batches. Everything in here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "carel/types.hpp"

namespace carel {

inline constexpr double kLogStdMin = -6.0;
inline constexpr double kLogStdMax = 4.0;

inline double clamp_log_std(double v) { return std::clamp(v, kLogStdMin, kLogStdMax); }

/// q(z) = N(mean, diag(exp(log_std))^2). log_std is clamped on construction.
class DiagonalGaussian {
 public:
  DiagonalGaussian(Vector mean, Vector log_std) : mean_(std::move(mean)), log_std_(std::move(log_std)) {
    if (mean_.size() < 1 || mean_.size() != log_std_.size())
      throw DomainError("DiagonalGaussian: mean and log_std must have equal dimension >= 1");
    if (!mean_.allFinite() || !log_std_.allFinite())
      throw DomainError("DiagonalGaussian: non-finite parameters");
    log_std_ = log_std_.unaryExpr([](double v) { return clamp_log_std(v); });
  }

  static DiagonalGaussian standard(Index d) { return {Vector::Zero(d), Vector::Zero(d)}; }

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& log_std() const { return log_std_; }
  Vector std() const { return log_std_.array().exp().matrix(); }

  bool operator==(const DiagonalGaussian& o) const { return mean_ == o.mean_ && log_std_ == o.log_std_; }

 private:
  Vector mean_;
  Vector log_std_;
};

/// m samples of a d-dimensional latent, one per row.
class SampleBatch {
 public:
  explicit SampleBatch(Matrix rows) : rows_(std::move(rows)) {
    if (rows_.rows() < 1 || rows_.cols() < 1) throw DomainError("SampleBatch: empty batch");
    if (!rows_.allFinite()) throw DomainError("SampleBatch: non-finite entries");
  }
  Index size() const { return rows_.rows(); }
  Index dim() const { return rows_.cols(); }
  const Matrix& rows() const { return rows_; }

 private:
  Matrix rows_;
};

struct MedianHeuristic {};

/// RBF kernel k(u, v) = exp(-|u - v|^2 / (2 bandwidth^2)).
struct KernelSpec {
  std::variant<MedianHeuristic, double> bandwidth = MedianHeuristic{};

  static KernelSpec rbf(double bw) {
    if (!(bw > 0.0) || !std::isfinite(bw)) throw DomainError("KernelSpec: bandwidth must be positive");
    return KernelSpec{bw};
  }
  static KernelSpec median_heuristic() { return KernelSpec{MedianHeuristic{}}; }
  bool uses_median() const { return std::holds_alternative<MedianHeuristic>(bandwidth); }
  double numeric() const { return std::get<double>(bandwidth); }
};

/// Exact KL(q || N(0, I)).
inline double kl_to_standard_normal(const DiagonalGaussian& q) {
  const auto ls = q.log_std().array();
  const double kl = 0.5 * (q.mean().array().square() + (2.0 * ls).exp() - 1.0 - 2.0 * ls).sum();
  return std::max(kl, 0.0);
}

/// Bhattacharyya distance with the averaged covariance (S_a + S_b) / 2.
inline double bhattacharyya_diag(const DiagonalGaussian& a, const DiagonalGaussian& b) {
  if (a.dim() != b.dim()) throw DomainError("bhattacharyya_diag: dimension mismatch");
  double quad = 0.0;
  double logdet = 0.0;
  for (Index i = 0; i < a.dim(); ++i) {
    const double la = a.log_std()[i];
    const double lb = b.log_std()[i];
    const double s = 0.5 * (std::exp(2.0 * la) + std::exp(2.0 * lb));
    const double diff = a.mean()[i] - b.mean()[i];
    quad += diff * diff / s;
    // log(s) - la - lb rewritten so that equal arguments give exactly zero
    // and swapping the arguments is bit-for-bit symmetric.
    logdet += std::log(std::cosh(la - lb));
  }
  return std::max(0.125 * quad + 0.5 * logdet, 0.0);
}

/// Partial derivatives of bhattacharyya_diag with respect to each parameter
/// vector. Used by the autodiff graph and checked against finite differences.
struct BhattacharyyaGrad {
  Vector d_mean_a, d_log_std_a, d_mean_b, d_log_std_b;
};

inline BhattacharyyaGrad bhattacharyya_diag_grad(const DiagonalGaussian& a, const DiagonalGaussian& b) {
  if (a.dim() != b.dim()) throw DomainError("bhattacharyya_diag_grad: dimension mismatch");
  const Index d = a.dim();
  BhattacharyyaGrad g{Vector(d), Vector(d), Vector(d), Vector(d)};
  for (Index i = 0; i < d; ++i) {
    const double va = std::exp(2.0 * a.log_std()[i]);
    const double vb = std::exp(2.0 * b.log_std()[i]);
    const double s = 0.5 * (va + vb);
    const double diff = a.mean()[i] - b.mean()[i];
    const double d_s = -0.125 * diff * diff / (s * s) + 0.5 / s;
    g.d_mean_a[i] = 0.25 * diff / s;
    g.d_mean_b[i] = -g.d_mean_a[i];
    g.d_log_std_a[i] = d_s * va - 0.5;
    g.d_log_std_b[i] = d_s * vb - 0.5;
  }
  return g;
}

enum class BhMode { within, batchwise };

/// Negated mean Bhattacharyya distance between emotion and event posteriors,
/// either per pair (within) or over every (E_i, C_j) in the batch.
inline double bh_regularizer(const std::vector<std::pair<DiagonalGaussian, DiagonalGaussian>>& pairs, BhMode mode) {
  if (pairs.empty()) throw DomainError("bh_regularizer: empty batch");
  double total = 0.0;
  if (mode == BhMode::within) {
    for (const auto& [e, c] : pairs) total += bhattacharyya_diag(e, c);
    return -total / static_cast<double>(pairs.size());
  }
  for (const auto& pe : pairs)
    for (const auto& pc : pairs) total += bhattacharyya_diag(pe.first, pc.second);
  const double m = static_cast<double>(pairs.size());
  return -total / (m * m);
}

namespace detail {

inline std::vector<double> pairwise_distances(const Matrix& rows) {
  std::vector<double> out;
  const Index n = rows.rows();
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) out.push_back((rows.row(i) - rows.row(j)).norm());
  return out;
}

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Matrix stack_rows(const Matrix& x, const Matrix& y) {
  Matrix out(x.rows() + y.rows(), x.cols());
  out << x, y;
  return out;
}

inline double sq_dist(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace detail

/// Median of pairwise Euclidean distances among the rows of `rows` (i < j).
inline double median_pairwise_distance(const Matrix& rows) {
  if (rows.rows() < 2) throw DomainError("median heuristic needs at least 2 samples");
  const double med = detail::median_of(detail::pairwise_distances(rows));
  if (!(med > 0.0)) throw DomainError("median heuristic: pairwise distances are all zero");
  return med;
}

/// Median of pairwise distances over the pooled samples of x and y.
inline double median_heuristic_bandwidth(const SampleBatch& x, const SampleBatch& y) {
  if (x.dim() != y.dim()) throw DomainError("median_heuristic_bandwidth: dimension mismatch");
  return median_pairwise_distance(detail::stack_rows(x.rows(), y.rows()));
}

inline Matrix rbf_gram(const Matrix& x, const Matrix& y, double bandwidth) {
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  Matrix k(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < y.rows(); ++j) k(i, j) = std::exp(-detail::sq_dist(x, i, y, j) * inv);
  return k;
}

/// Biased (V-statistic) squared MMD with an RBF kernel.
inline double mmd_biased_sq(const SampleBatch& x, const SampleBatch& y, const KernelSpec& k) {
  if (x.dim() != y.dim()) throw DomainError("mmd_biased_sq: dimension mismatch");
  const double bw = k.uses_median() ? median_heuristic_bandwidth(x, y) : k.numeric();
  const double m = static_cast<double>(x.size());
  const double n = static_cast<double>(y.size());
  const double kxx = rbf_gram(x.rows(), x.rows(), bw).sum() / (m * m);
  const double kyy = rbf_gram(y.rows(), y.rows(), bw).sum() / (n * n);
  const double kxy = rbf_gram(x.rows(), y.rows(), bw).sum() / (m * n);
  return std::max(kxx + kyy - 2.0 * kxy, 0.0);
}

/// H K H with H = I - 11^T / m.
inline Matrix center_gram(const Matrix& k) {
  const RowVector col_mean = k.colwise().mean();
  const Vector row_mean = k.rowwise().mean();
  const double mean = k.mean();
  Matrix out = k;
  out.rowwise() -= col_mean;
  out.colwise() -= row_mean;
  out.array() += mean;
  return out;
}

/// Biased HSIC: trace(K H L H) / (m - 1)^2. With the median heuristic each
/// Gram matrix uses the median distance within its own batch.
inline double hsic_biased(const SampleBatch& x, const SampleBatch& y, const KernelSpec& k) {
  if (x.size() != y.size()) throw DomainError("hsic_biased: row-count mismatch");
  if (x.size() < 2) throw DomainError("hsic_biased: needs at least 2 rows");
  const auto bandwidth_for = [&](const Matrix& rows) {
    if (!k.uses_median()) return k.numeric();
    const auto d = detail::pairwise_distances(rows);
    const double med = detail::median_of(d);
    // A constant batch has a zero Gram-centered matrix whatever the bandwidth.
    return med > 0.0 ? med : 1.0;
  };
  const Matrix kx = rbf_gram(x.rows(), x.rows(), bandwidth_for(x.rows()));
  const Matrix ly = rbf_gram(y.rows(), y.rows(), bandwidth_for(y.rows()));
  const double m1 = static_cast<double>(x.size() - 1);
  return std::max(center_gram(kx).cwiseProduct(ly).sum() / (m1 * m1), 0.0);
}

}  // namespace carel

#pragma once

// Minimal reverse-mode differentiation over dense matrices. A Tape records
// every intermediate value together with a closure that pushes the output
// gradient back to the inputs. Batches travel as rows.

#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "carel/divergence.hpp"
#include "carel/sparsemax.hpp"
#include "carel/types.hpp"

namespace carel::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Var constant(Matrix value) { return push(std::move(value), false, {}); }
  Var variable(Matrix value) { return push(std::move(value), true, {}); }

  Var push(Matrix value, bool requires_grad, std::function<void()> backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds g into the gradient of v if v participates in differentiation.
  void accumulate(const Var& v, const Matrix& g) {
    auto& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    n.grad += g;
  }

  /// Seeds d(output)/d(output) = 1 and runs every recorded closure in reverse.
  void backward(const Var& output) {
    if (output.rows() != 1 || output.cols() != 1) throw DomainError("backward: output must be a scalar");
    for (std::size_t i = 0; i <= output.id(); ++i) {
      auto& n = nodes_[i];
      if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    nodes_[output.id()].grad(0, 0) = 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.requires_grad && n.backward) n.backward();
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    std::function<void()> backward;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DomainError(std::string(op) + ": shape mismatch");
}

template <class Backward>
Var record(Tape& t, Matrix value, std::initializer_list<Var> inputs, Backward&& bw) {
  bool rg = false;
  for (const auto& in : inputs) rg = rg || in.requires_grad();
  if (!rg) return t.push(std::move(value), false, {});
  // The output id is only known after the push, so the closure reads it back
  // through a shared slot.
  auto out_id = std::make_shared<std::size_t>(0);
  Var out = t.push(std::move(value), true, [&t, out_id, bw = std::forward<Backward>(bw)]() {
    bw(t.grad(*out_id));
  });
  *out_id = out.id();
  return out;
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw DomainError("matmul: inner dimension mismatch");
  Tape& t = *a.tape();
  return detail::record(t, a.value() * b.value(), {a, b}, [&t, a, b](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

/// a * b^T, for weights stored as (out, in).
inline Var matmul_bt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw DomainError("matmul_bt: inner dimension mismatch");
  Tape& t = *a.tape();
  return detail::record(t, a.value() * b.value().transpose(), {a, b}, [&t, a, b](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value());
    if (b.requires_grad()) t.accumulate(b, g.transpose() * a.value());
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  Tape& t = *a.tape();
  return detail::record(t, a.value() + b.value(), {a, b}, [&t, a, b](const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  return detail::record(t, a.value() - b.value(), {a, b}, [&t, a, b](const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  return detail::record(t, a.value().cwiseProduct(b.value()), {a, b}, [&t, a, b](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

/// a + 1 * row, broadcasting a (1, n) row over every row of a.
inline Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DomainError("add_row: shape mismatch");
  Tape& t = *a.tape();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return detail::record(t, std::move(v), {a, row}, [&t, a, row](const Matrix& g) {
    t.accumulate(a, g);
    if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
  });
}

inline Var scale(const Var& a, double c) {
  Tape& t = *a.tape();
  return detail::record(t, a.value() * c, {a}, [&t, a, c](const Matrix& g) { t.accumulate(a, g * c); });
}

inline Var add_scalar(const Var& a, double c) {
  Tape& t = *a.tape();
  return detail::record(t, (a.value().array() + c).matrix(), {a}, [&t, a](const Matrix& g) { t.accumulate(a, g); });
}

/// Elementwise product with a constant mask (dropout, selection).
inline Var mul_const(const Var& a, const Matrix& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) throw DomainError("mul_const: shape mismatch");
  Tape& t = *a.tape();
  return detail::record(t, a.value().cwiseProduct(mask), {a},
                        [&t, a, mask](const Matrix& g) { t.accumulate(a, g.cwiseProduct(mask)); });
}

inline Var tanh(const Var& a) {
  Tape& t = *a.tape();
  Matrix v = a.value().array().tanh().matrix();
  Matrix deriv = (1.0 - v.array().square()).matrix();
  return detail::record(t, std::move(v), {a},
                        [&t, a, deriv = std::move(deriv)](const Matrix& g) { t.accumulate(a, g.cwiseProduct(deriv)); });
}

inline Matrix sigmoid_value(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

inline Var sigmoid(const Var& a) {
  Tape& t = *a.tape();
  Matrix v = sigmoid_value(a.value());
  Matrix deriv = v.cwiseProduct((1.0 - v.array()).matrix());
  return detail::record(t, std::move(v), {a},
                        [&t, a, deriv = std::move(deriv)](const Matrix& g) { t.accumulate(a, g.cwiseProduct(deriv)); });
}

inline Var exp(const Var& a) {
  Tape& t = *a.tape();
  Matrix v = a.value().array().exp().matrix();
  Matrix copy = v;
  return detail::record(t, std::move(v), {a},
                        [&t, a, copy = std::move(copy)](const Matrix& g) { t.accumulate(a, g.cwiseProduct(copy)); });
}

/// Clamp with zero gradient outside [lo, hi].
inline Var clamp(const Var& a, double lo, double hi) {
  Tape& t = *a.tape();
  Matrix v = a.value().cwiseMax(lo).cwiseMin(hi);
  Matrix pass = a.value().unaryExpr([lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
  return detail::record(t, std::move(v), {a},
                        [&t, a, pass = std::move(pass)](const Matrix& g) { t.accumulate(a, g.cwiseProduct(pass)); });
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::record(t, std::move(v), {a}, [&t, a](const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

inline Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw DomainError("concat_cols: row mismatch");
  Tape& t = *a.tape();
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const Index ac = a.cols();
  const Index bc = b.cols();
  return detail::record(t, std::move(v), {a, b}, [&t, a, b, ac, bc](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.leftCols(ac));
    if (b.requires_grad()) t.accumulate(b, g.rightCols(bc));
  });
}

inline Var concat_rows(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw DomainError("concat_rows: column mismatch");
  Tape& t = *a.tape();
  Matrix v(a.rows() + b.rows(), a.cols());
  v << a.value(), b.value();
  const Index ar = a.rows();
  const Index br = b.rows();
  return detail::record(t, std::move(v), {a, b}, [&t, a, b, ar, br](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.topRows(ar));
    if (b.requires_grad()) t.accumulate(b, g.bottomRows(br));
  });
}

inline Var slice_cols(const Var& a, Index start, Index n) {
  if (start < 0 || start + n > a.cols()) throw DomainError("slice_cols: out of range");
  Tape& t = *a.tape();
  return detail::record(t, a.value().middleCols(start, n), {a}, [&t, a, start, n](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, n) = g;
    t.accumulate(a, full);
  });
}

inline Var slice_rows(const Var& a, Index start, Index n) {
  if (start < 0 || start + n > a.rows()) throw DomainError("slice_rows: out of range");
  Tape& t = *a.tape();
  return detail::record(t, a.value().middleRows(start, n), {a}, [&t, a, start, n](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, n) = g;
    t.accumulate(a, full);
  });
}

/// Row i of the result is the mean of table rows listed in ids[i]
/// (an embedding bag). Empty lists give a zero row.
inline Var embedding_bag(const Var& table, const std::vector<std::vector<int>>& ids) {
  Tape& t = *table.tape();
  const Matrix& e = table.value();
  Matrix v = Matrix::Zero(static_cast<Index>(ids.size()), e.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].empty()) continue;
    for (int tok : ids[i]) v.row(static_cast<Index>(i)) += e.row(tok);
    v.row(static_cast<Index>(i)) /= static_cast<double>(ids[i].size());
  }
  return detail::record(t, std::move(v), {table}, [&t, table, ids](const Matrix& g) {
    Matrix d = Matrix::Zero(table.rows(), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i].empty()) continue;
      const double w = 1.0 / static_cast<double>(ids[i].size());
      for (int tok : ids[i]) d.row(tok) += w * g.row(static_cast<Index>(i));
    }
    t.accumulate(table, d);
  });
}

/// Sparsemax attention with one learned query over per-token states.
/// For row i the keys and values are the table rows listed in ids[i];
/// scores are query . key / sqrt(dim).
inline Var sparsemax_attention(const Var& table, const std::vector<std::vector<int>>& ids, const Var& query) {
  if (query.rows() != 1 || query.cols() != table.cols()) throw DomainError("sparsemax_attention: query dimension mismatch");
  Tape& t = *table.tape();
  const Matrix& e = table.value();
  const RowVector q = query.value().row(0);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(e.cols()));
  Matrix v = Matrix::Zero(static_cast<Index>(ids.size()), e.cols());
  std::vector<Vector> weights(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& row_ids = ids[i];
    if (row_ids.empty()) throw DomainError("sparsemax_attention: empty key set");
    Vector scores(static_cast<Index>(row_ids.size()));
    for (std::size_t k = 0; k < row_ids.size(); ++k) scores[static_cast<Index>(k)] = e.row(row_ids[k]).dot(q) * inv_sqrt;
    weights[i] = sparsemax(scores);
    for (std::size_t k = 0; k < row_ids.size(); ++k)
      v.row(static_cast<Index>(i)) += weights[i][static_cast<Index>(k)] * e.row(row_ids[k]);
  }
  return detail::record(t, std::move(v), {table, query},
                        [&t, table, query, ids, weights = std::move(weights), inv_sqrt](const Matrix& g) {
    const Matrix& e = table.value();
    const RowVector q = query.value().row(0);
    Matrix d_table = Matrix::Zero(e.rows(), e.cols());
    RowVector d_query = RowVector::Zero(e.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& row_ids = ids[i];
      const RowVector gi = g.row(static_cast<Index>(i));
      Vector d_w(static_cast<Index>(row_ids.size()));
      for (std::size_t k = 0; k < row_ids.size(); ++k) {
        d_w[static_cast<Index>(k)] = gi.dot(e.row(row_ids[k]));
        d_table.row(row_ids[k]) += weights[i][static_cast<Index>(k)] * gi;
      }
      const Vector d_scores = sparsemax_backward(weights[i], d_w);
      for (std::size_t k = 0; k < row_ids.size(); ++k) {
        const double ds = d_scores[static_cast<Index>(k)] * inv_sqrt;
        if (ds == 0.0) continue;
        d_query += ds * e.row(row_ids[k]);
        d_table.row(row_ids[k]) += ds * q;
      }
    }
    t.accumulate(table, d_table);
    if (query.requires_grad()) t.accumulate(query, d_query);
  });
}

/// Mean over rows of the categorical cross-entropy of softmax(logits).
inline Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) throw DomainError("softmax_cross_entropy: label count mismatch");
  Tape& t = *logits.tape();
  const Matrix& l = logits.value();
  Matrix probs(l.rows(), l.cols());
  double total = 0.0;
  for (Index i = 0; i < l.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= l.cols()) throw DomainError("softmax_cross_entropy: label out of range");
    const double mx = l.row(i).maxCoeff();
    const RowVector ex = (l.row(i).array() - mx).exp().matrix();
    const double z = ex.sum();
    probs.row(i) = ex / z;
    total += std::log(z) + mx - l(i, y);
  }
  Matrix v(1, 1);
  v(0, 0) = total / static_cast<double>(l.rows());
  std::vector<int> ys(labels.begin(), labels.end());
  return detail::record(t, std::move(v), {logits}, [&t, logits, probs = std::move(probs), ys = std::move(ys)](const Matrix& g) {
    Matrix d = probs;
    for (std::size_t i = 0; i < ys.size(); ++i) d(static_cast<Index>(i), ys[i]) -= 1.0;
    t.accumulate(logits, d * (g(0, 0) / static_cast<double>(ys.size())));
  });
}

/// Binary cross-entropy of sigmoid(logits) against targets, summed over
/// columns and averaged over rows.
inline Var sigmoid_bce(const Var& logits, const Matrix& targets) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) throw DomainError("sigmoid_bce: shape mismatch");
  Tape& t = *logits.tape();
  const Matrix& l = logits.value();
  const Matrix loss = l.binaryExpr(targets, [](double x, double y) {
    return std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  });
  Matrix v(1, 1);
  v(0, 0) = loss.sum() / static_cast<double>(l.rows());
  return detail::record(t, std::move(v), {logits}, [&t, logits, targets](const Matrix& g) {
    Matrix d = sigmoid_value(logits.value()) - targets;
    t.accumulate(logits, d * (g(0, 0) / static_cast<double>(logits.rows())));
  });
}

/// Per-row KL(N(mu, exp(ls)^2) || N(0, I)), shape (m, 1).
inline Var kl_standard_normal_rows(const Var& mu, const Var& ls) {
  detail::check_same_shape(mu, ls, "kl_standard_normal_rows");
  Tape& t = *mu.tape();
  const Matrix var = (2.0 * ls.value().array()).exp().matrix();
  Matrix v = (0.5 * (mu.value().array().square() + var.array() - 1.0 - 2.0 * ls.value().array())).rowwise().sum().matrix();
  return detail::record(t, std::move(v), {mu, ls}, [&t, mu, ls, var](const Matrix& g) {
    const Vector gc = g.col(0);
    if (mu.requires_grad()) t.accumulate(mu, (mu.value().array().colwise() * gc.array()).matrix());
    if (ls.requires_grad()) t.accumulate(ls, ((var.array() - 1.0).colwise() * gc.array()).matrix());
  });
}

/// Bhattacharyya distances between rows of (mu_a, ls_a) and rows of
/// (mu_b, ls_b): the (m, 1) diagonal when all_pairs is false, else (m, m).
inline Var bhattacharyya_rows(const Var& mu_a, const Var& ls_a, const Var& mu_b, const Var& ls_b, bool all_pairs) {
  detail::check_same_shape(mu_a, ls_a, "bhattacharyya_rows");
  detail::check_same_shape(mu_b, ls_b, "bhattacharyya_rows");
  detail::check_same_shape(mu_a, mu_b, "bhattacharyya_rows");
  Tape& t = *mu_a.tape();
  const Index m = mu_a.rows();
  const auto gauss = [](const Var& mu, const Var& ls, Index i) {
    return DiagonalGaussian(mu.value().row(i).transpose(), ls.value().row(i).transpose());
  };
  Matrix v(m, all_pairs ? m : 1);
  for (Index i = 0; i < m; ++i) {
    if (all_pairs) {
      for (Index j = 0; j < m; ++j) v(i, j) = bhattacharyya_diag(gauss(mu_a, ls_a, i), gauss(mu_b, ls_b, j));
    } else {
      v(i, 0) = bhattacharyya_diag(gauss(mu_a, ls_a, i), gauss(mu_b, ls_b, i));
    }
  }
  return detail::record(t, std::move(v), {mu_a, ls_a, mu_b, ls_b},
                        [&t, mu_a, ls_a, mu_b, ls_b, all_pairs, m, gauss](const Matrix& g) {
    Matrix dma = Matrix::Zero(m, mu_a.cols()), dla = dma, dmb = dma, dlb = dma;
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < (all_pairs ? m : 1); ++j) {
        const Index jb = all_pairs ? j : i;
        const double w = g(i, j);
        if (w == 0.0) continue;
        const auto gr = bhattacharyya_diag_grad(gauss(mu_a, ls_a, i), gauss(mu_b, ls_b, jb));
        dma.row(i) += w * gr.d_mean_a.transpose();
        dla.row(i) += w * gr.d_log_std_a.transpose();
        dmb.row(jb) += w * gr.d_mean_b.transpose();
        dlb.row(jb) += w * gr.d_log_std_b.transpose();
      }
    }
    t.accumulate(mu_a, dma);
    t.accumulate(ls_a, dla);
    t.accumulate(mu_b, dmb);
    t.accumulate(ls_b, dlb);
  });
}

/// Median pairwise row distance, differentiable through the selected pair(s).
inline Var median_pairwise_distance(const Var& x) {
  Tape& t = *x.tape();
  const Matrix& rows = x.value();
  const Index n = rows.rows();
  if (n < 2) throw DomainError("median heuristic needs at least 2 samples");
  struct Entry {
    double dist;
    Index i, j;
  };
  std::vector<Entry> entries;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) entries.push_back({(rows.row(i) - rows.row(j)).norm(), i, j});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.dist < b.dist; });
  const std::size_t cnt = entries.size();
  std::vector<std::pair<Entry, double>> picked;
  if (cnt % 2 == 1) {
    picked.push_back({entries[cnt / 2], 1.0});
  } else {
    picked.push_back({entries[cnt / 2 - 1], 0.5});
    picked.push_back({entries[cnt / 2], 0.5});
  }
  double med = 0.0;
  for (const auto& [e, w] : picked) med += w * e.dist;
  if (!(med > 0.0)) throw DomainError("median heuristic: pairwise distances are all zero");
  Matrix v(1, 1);
  v(0, 0) = med;
  return detail::record(t, std::move(v), {x}, [&t, x, picked](const Matrix& g) {
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    for (const auto& [e, w] : picked) {
      if (e.dist == 0.0) continue;
      const RowVector u = (x.value().row(e.i) - x.value().row(e.j)) * (w * g(0, 0) / e.dist);
      d.row(e.i) += u;
      d.row(e.j) -= u;
    }
    t.accumulate(x, d);
  });
}

/// RBF Gram matrix K(i, j) = exp(-|x_i - y_j|^2 / (2 bw^2)) with bw a (1, 1) node.
inline Var rbf_gram(const Var& x, const Var& y, const Var& bandwidth) {
  if (x.cols() != y.cols()) throw DomainError("rbf_gram: dimension mismatch");
  Tape& t = *x.tape();
  const double bw = bandwidth.scalar();
  Matrix k = carel::rbf_gram(x.value(), y.value(), bw);
  Matrix kc = k;
  return detail::record(t, std::move(k), {x, y, bandwidth}, [&t, x, y, bandwidth, kc = std::move(kc)](const Matrix& g) {
    const double bw = bandwidth.scalar();
    const double inv2 = 1.0 / (bw * bw);
    const Matrix& xv = x.value();
    const Matrix& yv = y.value();
    Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
    Matrix dy = Matrix::Zero(yv.rows(), yv.cols());
    double dbw = 0.0;
    for (Index i = 0; i < xv.rows(); ++i) {
      for (Index j = 0; j < yv.rows(); ++j) {
        const double w = g(i, j) * kc(i, j);
        if (w == 0.0) continue;
        const RowVector diff = xv.row(i) - yv.row(j);
        dx.row(i) -= w * inv2 * diff;
        dy.row(j) += w * inv2 * diff;
        dbw += w * diff.squaredNorm() * inv2 / bw;
      }
    }
    t.accumulate(x, dx);
    t.accumulate(y, dy);
    if (bandwidth.requires_grad()) t.accumulate(bandwidth, Matrix::Constant(1, 1, dbw));
  });
}

/// H K H with H the centering matrix. Linear and self-adjoint.
inline Var center_gram(const Var& k) {
  if (k.rows() != k.cols()) throw DomainError("center_gram: matrix must be square");
  Tape& t = *k.tape();
  return detail::record(t, carel::center_gram(k.value()), {k},
                        [&t, k](const Matrix& g) { t.accumulate(k, carel::center_gram(g)); });
}

}  // namespace carel::ad

#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "carel/autodiff.hpp"
#include "carel/types.hpp"

namespace carel {

using Gradients = std::map<std::string, Matrix>;

/// Named parameter arrays. Ordered by name so iteration (and therefore
/// serialization and optimizer updates) is deterministic.
class ParamStore {
 public:
  void add(const std::string& name, Matrix value) { values_[name] = std::move(value); }
  bool contains(const std::string& name) const { return values_.count(name) != 0; }

  const Matrix& at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  Matrix& at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  const std::map<std::string, Matrix>& all() const { return values_; }
  std::map<std::string, Matrix>& all() { return values_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [_, m] : values_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [_, m] : values_)
      if (!m.allFinite()) return false;
    return true;
  }

  bool operator==(const ParamStore& o) const { return values_ == o.values_; }

 private:
  std::map<std::string, Matrix> values_;
};

/// Puts parameters on a tape on first use and collects their gradients
/// after backward().
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParamStore& store, bool trainable)
      : tape_(tape), store_(store), trainable_(trainable) {}

  ad::Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = trainable_ ? tape_.variable(store_.at(name)) : tape_.constant(store_.at(name));
    bound_.emplace(name, v);
    return v;
  }

  ad::Tape& tape() { return tape_; }

  /// Gradients for every parameter in the store; unused ones are zero.
  Gradients gradients() const {
    Gradients g;
    for (const auto& [name, value] : store_.all()) {
      auto it = bound_.find(name);
      if (it != bound_.end() && it->second.requires_grad())
        g[name] = it->second.grad();
      else
        g[name] = Matrix::Zero(value.rows(), value.cols());
    }
    return g;
  }

 private:
  ad::Tape& tape_;
  const ParamStore& store_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params, const Gradients& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, value] : params.all()) {
      auto git = grads.find(name);
      if (git == grads.end()) continue;
      const Matrix& g = git->second;
      auto [mit, m_new] = m_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()));
      auto [vit, v_new] = v_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()));
      Matrix& m = mit->second;
      Matrix& v = vit->second;
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
  long t_ = 0;
};

namespace init {

inline Matrix uniform(Index rows, Index cols, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

/// Glorot-uniform weight stored as (out, in).
inline Matrix xavier(Index out, Index in, std::mt19937_64& rng) {
  return uniform(out, in, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
}

inline Matrix normal(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace init

/// y = x W^T + b with W stored as "<prefix>.weight" (out, in) and
/// "<prefix>.bias" (1, out).
inline void add_linear(ParamStore& store, const std::string& prefix, Index in, Index out, std::mt19937_64& rng) {
  store.add(prefix + ".weight", init::xavier(out, in, rng));
  store.add(prefix + ".bias", Matrix::Zero(1, out));
}

inline ad::Var linear(ParamBinder& p, const std::string& prefix, const ad::Var& x) {
  return ad::add_row(ad::matmul_bt(x, p(prefix + ".weight")), p(prefix + ".bias"));
}

/// Inverted dropout mask with keep probability 1 - rate.
inline Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix m(rows, cols);
  const double s = 1.0 / (1.0 - rate);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = keep(rng) ? s : 0.0;
  return m;
}

}  // namespace carel

#pragma once

// Central finite-difference check of the pair model's training loss against
// the reverse-mode gradients, on a tiny fixed batch with fixed noise.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "carel/pair_model.hpp"

namespace carel {

struct GradCheckConfig {
  std::size_t vocab_size = 20;
  Index latent_dim = 4;
  Index hidden_dim = 8;
  std::size_t batch_size = 3;
  double step = 1e-5;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator so
  /// that near-zero gradients are compared absolutely.
  double denominator_floor = 1e-4;
  AdapterMode adapter = AdapterMode::pooled;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  Regularizer regularizer = Regularizer::none;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t n_checked = 0;
};

/// A deterministic tiny batch of [CLS] a.. [SEP] b.. sequences over `vocab_size` ids.
inline std::vector<PairExample> gradcheck_batch(std::size_t vocab_size, std::size_t batch_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(Vocabulary::kNumSpecial, static_cast<int>(vocab_size) - 1);
  std::uniform_int_distribution<int> len(1, 3);
  std::vector<PairExample> batch;
  for (std::size_t i = 0; i < batch_size; ++i) {
    PairExample ex;
    ex.tokens.push_back(Vocabulary::kCls);
    for (int k = len(rng); k > 0; --k) ex.tokens.push_back(tok(rng));
    ex.tokens.push_back(Vocabulary::kSep);
    for (int k = len(rng); k > 0; --k) ex.tokens.push_back(tok(rng));
    ex.emotion = 1 + static_cast<int>(i % (kNumEmotionClasses - 1));
    ex.event = static_cast<int>(i % 2);
    ex.relation = static_cast<int>((i + 1) % 2);
    batch.push_back(std::move(ex));
  }
  return batch;
}

inline GradCheckResult gradcheck_pair_model(Regularizer reg, const GradCheckConfig& gc = {}) {
  PairModelConfig cfg;
  cfg.vocab_size = gc.vocab_size;
  cfg.latent_dim = gc.latent_dim;
  cfg.hidden_dim = gc.hidden_dim;
  cfg.regularizer = reg;
  cfg.adapter = gc.adapter;
  PairModel model(cfg, gc.seed);
  const auto batch = gradcheck_batch(gc.vocab_size, gc.batch_size, gc.seed + 1);
  std::mt19937_64 rng(gc.seed + 2);
  const Index m = static_cast<Index>(gc.batch_size);
  const Noise noise = Noise::fixed(init::normal(m, gc.latent_dim, 1.0, rng), init::normal(m, gc.latent_dim, 1.0, rng));

  Gradients grads;
  model.loss_and_gradients(batch, noise, grads);
  GradCheckResult res;
  res.regularizer = reg;
  for (auto& [name, value] : model.params().all()) {
    const Matrix& g = grads.at(name);
    for (Index k = 0; k < value.size(); ++k) {
      const double orig = value.data()[k];
      value.data()[k] = orig + gc.step;
      const double up = model.total_loss(batch, noise).total;
      value.data()[k] = orig - gc.step;
      const double down = model.total_loss(batch, noise).total;
      value.data()[k] = orig;
      const double numeric = (up - down) / (2.0 * gc.step);
      const double analytic = g.data()[k];
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), gc.denominator_floor});
      ++res.n_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name;
      }
    }
  }
  return res;
}

inline std::vector<GradCheckResult> gradcheck_all(const GradCheckConfig& gc = {}) {
  std::vector<GradCheckResult> out;
  for (auto r : {Regularizer::none, Regularizer::bh, Regularizer::bh_batch, Regularizer::mmd, Regularizer::hsic})
    out.push_back(gradcheck_pair_model(r, gc));
  return out;
}

}  // namespace carel

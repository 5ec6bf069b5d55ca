#pragma once

// The clause-pair VAE: encoder + sparsemax adapters, two reparameterized
// diagonal-Gaussian encoders, a bag-of-words decoder, three task heads and
// the regularized ELBO training loss.

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "carel/autodiff.hpp"
#include "carel/corpus.hpp"
#include "carel/divergence.hpp"
#include "carel/encoder.hpp"
#include "carel/params.hpp"
#include "carel/sparsemax.hpp"

namespace carel {

enum class Regularizer { none, bh, bh_batch, mmd, hsic };

inline std::string regularizer_name(Regularizer r) {
  switch (r) {
    case Regularizer::none: return "none";
    case Regularizer::bh: return "bh";
    case Regularizer::bh_batch: return "bh-batch";
    case Regularizer::mmd: return "mmd";
    case Regularizer::hsic: return "hsic";
  }
  return "none";
}

inline Regularizer regularizer_from_name(const std::string& s) {
  for (auto r : {Regularizer::none, Regularizer::bh, Regularizer::bh_batch, Regularizer::mmd, Regularizer::hsic})
    if (regularizer_name(r) == s) return r;
  throw ConfigError("unknown regularizer: " + s);
}

enum class AdapterMode { pooled, per_token };

inline std::string adapter_mode_name(AdapterMode m) { return m == AdapterMode::pooled ? "pooled" : "per-token"; }
inline AdapterMode adapter_mode_from_name(const std::string& s) {
  if (s == "pooled") return AdapterMode::pooled;
  if (s == "per-token") return AdapterMode::per_token;
  throw ConfigError("unknown adapter mode: " + s);
}

struct LossWeights {
  double recon = 1.0;
  double kl_e = 1.0;
  double kl_c = 1.0;
  double ce_emotion = 1.0;
  double ce_event = 1.0;
  double ce_relation = 1.0;
};

struct PairModelConfig {
  std::size_t vocab_size = 0;
  Index hidden_dim = 64;  // d_h
  Index latent_dim = 24;  // d
  AdapterMode adapter = AdapterMode::pooled;
  Regularizer regularizer = Regularizer::mmd;
  double lambda = 1.0;
  KernelSpec kernel = KernelSpec::median_heuristic();
  LossWeights weights;
  double dropout = 0.5;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl_e = 0.0;
  double kl_c = 0.0;
  double ce_emotion = 0.0;
  double ce_event = 0.0;
  double ce_relation = 0.0;
  double regularizer = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

/// One labeled clause pair: token ids of [CLS] emotion [SEP] candidate plus
/// the emotion category of the emotion clause (1..6), whether the candidate
/// is a cause event, and whether the pair is causally related.
struct PairExample {
  std::vector<int> tokens;
  int emotion = 1;
  int event = 0;
  int relation = 0;
};

struct LatentPair {
  DiagonalGaussian q_e;
  DiagonalGaussian q_c;
  Vector z_e;
  Vector z_c;
  Vector noise_e;
  Vector noise_c;
};

/// Where the reparameterization noise comes from. `fixed` makes the loss a
/// deterministic function of the parameters (finite-difference checks);
/// `zero` is inference (z = mean). Dropout is active only in `sample` mode.
struct Noise {
  enum class Kind { sample, fixed, zero };
  Kind kind = Kind::zero;
  Matrix eps_e;
  Matrix eps_c;
  std::uint64_t seed = 0;

  static Noise sampled(std::uint64_t seed) { return {Kind::sample, {}, {}, seed}; }
  static Noise fixed(Matrix e, Matrix c) { return {Kind::fixed, std::move(e), std::move(c), 0}; }
  static Noise zero() { return {}; }
};

inline Tokens build_pair_input(const Tokens& emotion_clause, const Tokens& candidate_clause) {
  if (emotion_clause.empty() || candidate_clause.empty()) throw DomainError("build_pair_input: empty clause");
  Tokens out;
  out.reserve(emotion_clause.size() + candidate_clause.size() + 2);
  out.emplace_back(Vocabulary::kSpecialTokens[Vocabulary::kCls]);
  out.insert(out.end(), emotion_clause.begin(), emotion_clause.end());
  out.emplace_back(Vocabulary::kSpecialTokens[Vocabulary::kSep]);
  out.insert(out.end(), candidate_clause.begin(), candidate_clause.end());
  return out;
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const RowVector ex = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
    out.row(i) = ex / ex.sum();
  }
  return out;
}

class PairModel {
 public:
  /// Graph nodes of one forward pass.
  struct Forward {
    ad::Var mu_e, log_std_e, z_e;
    ad::Var mu_c, log_std_c, z_c;
    ad::Var decoder_logits;
    ad::Var emotion_logits, event_logits, relation_logits;
    Matrix eps_e, eps_c;
  };

  PairModel() = default;

  PairModel(PairModelConfig cfg, std::uint64_t seed, std::shared_ptr<const SequenceEncoder> enc = nullptr)
      : cfg_(cfg), encoder_(enc ? std::move(enc) : default_encoder(cfg.hidden_dim)) {
    if (cfg_.vocab_size < static_cast<std::size_t>(Vocabulary::kNumSpecial)) throw ConfigError("pair model: vocabulary too small");
    if (cfg_.latent_dim < 1 || cfg_.hidden_dim < 1) throw ConfigError("pair model: dimensions must be positive");
    std::mt19937_64 rng(seed);
    const Index d = cfg_.latent_dim;
    const Index dh = cfg_.hidden_dim;
    encoder().init_params(params_, cfg_.vocab_size, rng);
    params_.add("adapter.query_e", init::normal(1, dh, 1.0, rng));
    params_.add("adapter.query_c", init::normal(1, dh, 1.0, rng));
    for (const char* side : {"enc_e", "enc_c"}) {
      add_linear(params_, std::string(side) + ".hidden", dh, 2 * d, rng);
      add_linear(params_, std::string(side) + ".mu", 2 * d, d, rng);
      add_linear(params_, std::string(side) + ".log_std", 2 * d, d, rng);
    }
    add_linear(params_, "decoder", 2 * d, static_cast<Index>(cfg_.vocab_size), rng);
    add_linear(params_, "head.emotion", d, kNumEmotionClasses, rng);
    add_linear(params_, "head.event", d, 1, rng);
    add_linear(params_, "head.relation", 2 * d, 1, rng);
  }

  PairModel(PairModelConfig cfg, ParamStore params, std::shared_ptr<const SequenceEncoder> enc = nullptr)
      : cfg_(cfg), params_(std::move(params)), encoder_(enc ? std::move(enc) : default_encoder(cfg.hidden_dim)) {}

  const PairModelConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  Forward forward(ParamBinder& p, const std::vector<std::vector<int>>& seqs, const Noise& noise) const {
    const auto m = static_cast<Index>(seqs.size());
    if (m < 1) throw DomainError("pair model: empty batch");
    const Index d = cfg_.latent_dim;
    std::mt19937_64 rng(noise.seed);

    ad::Var h_e, h_c;
    if (cfg_.adapter == AdapterMode::pooled) {
      // A single pooled key: sparsemax over one score is exactly 1.
      h_e = h_c = encoder().encode(p, seqs);
    } else {
      TokenStates st = encoder().token_states(p, seqs);
      h_e = ad::sparsemax_attention(st.states, st.positions, p("adapter.query_e"));
      h_c = ad::sparsemax_attention(st.states, st.positions, p("adapter.query_c"));
    }

    Forward f;
    const auto gaussian_head = [&](const std::string& side, const ad::Var& h, ad::Var& mu, ad::Var& ls) {
      ad::Var hidden = ad::tanh(linear(p, side + ".hidden", h));
      if (noise.kind == Noise::Kind::sample && cfg_.dropout > 0.0)
        hidden = ad::mul_const(hidden, dropout_mask(hidden.rows(), hidden.cols(), cfg_.dropout, rng));
      mu = linear(p, side + ".mu", hidden);
      ls = ad::clamp(linear(p, side + ".log_std", hidden), kLogStdMin, kLogStdMax);
    };
    gaussian_head("enc_e", h_e, f.mu_e, f.log_std_e);
    gaussian_head("enc_c", h_c, f.mu_c, f.log_std_c);

    switch (noise.kind) {
      case Noise::Kind::zero:
        f.eps_e = f.eps_c = Matrix::Zero(m, d);
        break;
      case Noise::Kind::fixed:
        if (noise.eps_e.rows() != m || noise.eps_e.cols() != d || noise.eps_c.rows() != m || noise.eps_c.cols() != d)
          throw DomainError("pair model: fixed noise has the wrong shape");
        f.eps_e = noise.eps_e;
        f.eps_c = noise.eps_c;
        break;
      case Noise::Kind::sample:
        f.eps_e = init::normal(m, d, 1.0, rng);
        f.eps_c = init::normal(m, d, 1.0, rng);
        break;
    }
    f.z_e = ad::add(f.mu_e, ad::mul_const(ad::exp(f.log_std_e), f.eps_e));
    f.z_c = ad::add(f.mu_c, ad::mul_const(ad::exp(f.log_std_c), f.eps_c));

    const ad::Var z = ad::concat_cols(f.z_e, f.z_c);
    f.decoder_logits = linear(p, "decoder", z);
    f.emotion_logits = linear(p, "head.emotion", f.z_e);
    f.event_logits = linear(p, "head.event", f.z_c);
    f.relation_logits = linear(p, "head.relation", z);
    return f;
  }

  /// Posterior regularizer on a forward pass (0 for Regularizer::none).
  ad::Var regularizer(const Forward& f) const {
    ad::Tape& t = *f.z_e.tape();
    switch (cfg_.regularizer) {
      case Regularizer::none:
        return t.constant(Matrix::Zero(1, 1));
      case Regularizer::bh:
        return ad::scale(ad::mean(ad::bhattacharyya_rows(f.mu_e, f.log_std_e, f.mu_c, f.log_std_c, false)), -1.0);
      case Regularizer::bh_batch:
        return ad::scale(ad::mean(ad::bhattacharyya_rows(f.mu_e, f.log_std_e, f.mu_c, f.log_std_c, true)), -1.0);
      case Regularizer::mmd: {
        const ad::Var bw = cfg_.kernel.uses_median() ? ad::median_pairwise_distance(ad::concat_rows(f.z_e, f.z_c))
                                                     : t.constant(Matrix::Constant(1, 1, cfg_.kernel.numeric()));
        const ad::Var kxx = ad::mean(ad::rbf_gram(f.z_e, f.z_e, bw));
        const ad::Var kyy = ad::mean(ad::rbf_gram(f.z_c, f.z_c, bw));
        const ad::Var kxy = ad::mean(ad::rbf_gram(f.z_e, f.z_c, bw));
        const ad::Var mmd = ad::sub(ad::add(kxx, kyy), ad::scale(kxy, 2.0));
        return ad::scale(mmd, -1.0);
      }
      case Regularizer::hsic: {
        const Index m = f.z_e.rows();
        if (m < 2) return t.constant(Matrix::Zero(1, 1));
        const auto bandwidth = [&](const ad::Var& z) {
          return cfg_.kernel.uses_median() ? ad::median_pairwise_distance(z)
                                           : t.constant(Matrix::Constant(1, 1, cfg_.kernel.numeric()));
        };
        const ad::Var k = ad::center_gram(ad::rbf_gram(f.z_e, f.z_e, bandwidth(f.z_e)));
        const ad::Var l = ad::rbf_gram(f.z_c, f.z_c, bandwidth(f.z_c));
        const double m1 = static_cast<double>(m - 1);
        return ad::scale(ad::sum(ad::mul(k, l)), 1.0 / (m1 * m1));
      }
    }
    return t.constant(Matrix::Zero(1, 1));
  }

  /// Builds the full loss on the binder's tape; returns the scalar node and
  /// fills `out` with every component.
  ad::Var loss(ParamBinder& p, const std::vector<PairExample>& batch, const Noise& noise, LossBreakdown& out) const {
    std::vector<std::vector<int>> seqs;
    std::vector<int> emotions;
    Matrix bow(static_cast<Index>(batch.size()), static_cast<Index>(cfg_.vocab_size));
    Matrix events(static_cast<Index>(batch.size()), 1);
    Matrix relations(static_cast<Index>(batch.size()), 1);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& ex = batch[i];
      if (ex.emotion < 0 || ex.emotion >= kNumEmotionClasses) throw DomainError("pair example: emotion label out of range");
      if ((ex.event != 0 && ex.event != 1) || (ex.relation != 0 && ex.relation != 1)) throw DomainError("pair example: binary label out of range");
      seqs.push_back(ex.tokens);
      emotions.push_back(ex.emotion);
      bow.row(static_cast<Index>(i)) = to_bow(ex.tokens, cfg_.vocab_size).transpose();
      events(static_cast<Index>(i), 0) = ex.event;
      relations(static_cast<Index>(i), 0) = ex.relation;
    }

    const Forward f = forward(p, seqs, noise);
    const ad::Var recon = ad::sigmoid_bce(f.decoder_logits, bow);
    const ad::Var kl_e = ad::mean(ad::kl_standard_normal_rows(f.mu_e, f.log_std_e));
    const ad::Var kl_c = ad::mean(ad::kl_standard_normal_rows(f.mu_c, f.log_std_c));
    const ad::Var ce_emotion = ad::softmax_cross_entropy(f.emotion_logits, emotions);
    const ad::Var ce_event = ad::sigmoid_bce(f.event_logits, events);
    const ad::Var ce_relation = ad::sigmoid_bce(f.relation_logits, relations);
    const ad::Var reg = regularizer(f);

    const LossWeights& w = cfg_.weights;
    ad::Var total = ad::scale(recon, w.recon);
    total = ad::add(total, ad::scale(kl_e, w.kl_e));
    total = ad::add(total, ad::scale(kl_c, w.kl_c));
    total = ad::add(total, ad::scale(ce_emotion, w.ce_emotion));
    total = ad::add(total, ad::scale(ce_event, w.ce_event));
    total = ad::add(total, ad::scale(ce_relation, w.ce_relation));
    if (cfg_.regularizer != Regularizer::none) total = ad::add(total, ad::scale(reg, cfg_.lambda));

    out.recon = recon.scalar();
    out.kl_e = kl_e.scalar();
    out.kl_c = kl_c.scalar();
    out.ce_emotion = ce_emotion.scalar();
    out.ce_event = ce_event.scalar();
    out.ce_relation = ce_relation.scalar();
    out.regularizer = reg.scalar();
    out.total = total.scalar();
    return total;
  }

  LossBreakdown total_loss(const std::vector<PairExample>& batch, const Noise& noise) const {
    ad::Tape tape;
    ParamBinder p(tape, params_, false);
    LossBreakdown out;
    loss(p, batch, noise, out);
    return out;
  }

  LossBreakdown loss_and_gradients(const std::vector<PairExample>& batch, const Noise& noise, Gradients& grads) const {
    ad::Tape tape;
    ParamBinder p(tape, params_, true);
    LossBreakdown out;
    const ad::Var total = loss(p, batch, noise, out);
    tape.backward(total);
    grads = p.gradients();
    return out;
  }

  /// One Adam update. Noise and dropout come from `seed`.
  LossBreakdown train_step(const std::vector<PairExample>& batch, Adam& opt, double lr, std::uint64_t seed) {
    Gradients grads;
    const LossBreakdown lb = loss_and_gradients(batch, Noise::sampled(seed), grads);
    check_finite(lb);
    opt.step(params_, grads, lr);
    if (!params_.all_finite()) throw TrainingError("params", "non-finite parameters after update");
    return lb;
  }

  /// Posterior parameters and (noise-free unless given) latent samples.
  std::vector<LatentPair> variational_encode(const std::vector<std::vector<int>>& seqs, const Noise& noise = Noise::zero()) const {
    ad::Tape tape;
    ParamBinder p(tape, params_, false);
    const Forward f = forward(p, seqs, noise);
    std::vector<LatentPair> out;
    for (Index i = 0; i < static_cast<Index>(seqs.size()); ++i) {
      out.push_back(LatentPair{DiagonalGaussian(f.mu_e.value().row(i).transpose(), f.log_std_e.value().row(i).transpose()),
                               DiagonalGaussian(f.mu_c.value().row(i).transpose(), f.log_std_c.value().row(i).transpose()),
                               f.z_e.value().row(i).transpose(), f.z_c.value().row(i).transpose(),
                               f.eps_e.row(i).transpose(), f.eps_c.row(i).transpose()});
    }
    return out;
  }

  /// sigmoid(W_dec [z_e; z_c] + b_dec).
  Vector decode_bow(const Vector& z_e, const Vector& z_c) const {
    check_latent(z_e);
    check_latent(z_c);
    Vector z(2 * cfg_.latent_dim);
    z << z_e, z_c;
    const Matrix logits = (params_.at("decoder.weight") * z).transpose() + params_.at("decoder.bias");
    return ad::sigmoid_value(logits).row(0).transpose();
  }

  Vector predict_emotion(const Vector& z_e) const {
    check_latent(z_e);
    const Matrix logits = (params_.at("head.emotion.weight") * z_e).transpose() + params_.at("head.emotion.bias");
    return softmax_rows(logits).row(0).transpose();
  }

  double predict_event(const Vector& z_c) const {
    check_latent(z_c);
    const Matrix logits = (params_.at("head.event.weight") * z_c).transpose() + params_.at("head.event.bias");
    return ad::sigmoid_value(logits)(0, 0);
  }

  double predict_relation(const Vector& z_e, const Vector& z_c) const {
    check_latent(z_e);
    check_latent(z_c);
    Vector z(2 * cfg_.latent_dim);
    z << z_e, z_c;
    const Matrix logits = (params_.at("head.relation.weight") * z).transpose() + params_.at("head.relation.bias");
    return ad::sigmoid_value(logits)(0, 0);
  }

  /// Relation probabilities at z = mean, processed in chunks.
  std::vector<double> relation_probabilities(const std::vector<std::vector<int>>& seqs, std::size_t chunk = 256) const {
    std::vector<double> out;
    out.reserve(seqs.size());
    for (std::size_t start = 0; start < seqs.size(); start += chunk) {
      const std::size_t end = std::min(seqs.size(), start + chunk);
      std::vector<std::vector<int>> part(seqs.begin() + static_cast<std::ptrdiff_t>(start), seqs.begin() + static_cast<std::ptrdiff_t>(end));
      ad::Tape tape;
      ParamBinder p(tape, params_, false);
      const Forward f = forward(p, part, Noise::zero());
      const Matrix probs = ad::sigmoid_value(f.relation_logits.value());
      for (Index i = 0; i < probs.rows(); ++i) out.push_back(probs(i, 0));
    }
    return out;
  }

  /// Emotion-head distributions at z = mean.
  Matrix emotion_probabilities(const std::vector<std::vector<int>>& seqs) const {
    ad::Tape tape;
    ParamBinder p(tape, params_, false);
    const Forward f = forward(p, seqs, Noise::zero());
    return softmax_rows(f.emotion_logits.value());
  }

  const SequenceEncoder& encoder() const { return *encoder_; }

 private:
  static std::shared_ptr<const SequenceEncoder> default_encoder(Index dim) {
    return std::make_shared<EmbeddingBagEncoder>("encoder", dim);
  }

  void check_latent(const Vector& z) const {
    if (z.size() != cfg_.latent_dim) throw DomainError("pair model: latent dimension mismatch");
  }

  static void check_finite(const LossBreakdown& lb) {
    const std::pair<const char*, double> parts[] = {
        {"recon", lb.recon},       {"kl_e", lb.kl_e},         {"kl_c", lb.kl_c},
        {"ce_emotion", lb.ce_emotion}, {"ce_event", lb.ce_event}, {"ce_relation", lb.ce_relation},
        {"regularizer", lb.regularizer}, {"total", lb.total}};
    for (const auto& [name, v] : parts)
      if (!std::isfinite(v)) throw TrainingError(name, std::string("non-finite loss component: ") + name);
  }

  PairModelConfig cfg_;
  ParamStore params_;
  std::shared_ptr<const SequenceEncoder> encoder_ = default_encoder(64);
};

}  // namespace carel

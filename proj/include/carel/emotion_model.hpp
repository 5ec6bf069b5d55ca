#pragma once

// Document-level emotion extraction: clause encoder, bidirectional LSTM over
// the clause sequence, and a seven-way softmax per clause.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "carel/autodiff.hpp"
#include "carel/corpus.hpp"
#include "carel/encoder.hpp"
#include "carel/params.hpp"

namespace carel {

struct EmotionModelConfig {
  std::size_t vocab_size = 0;
  Index clause_dim = 64;     // d_b
  Index context_dim = 100;   // d_l, per direction
  double dropout = 0.5;
};

/// c_i per clause (rows of `clause`) and a_i = [forward_i; backward_i]
/// (rows of `context`).
struct ClauseRepr {
  Matrix clause;
  Matrix context;
};

/// Clauses as token ids with one label per clause (Emotion as int).
struct LabeledDocument {
  std::vector<std::vector<int>> clauses;
  std::vector<int> labels;
};

/// Mean per-clause categorical cross-entropy. labels[i] < 0 marks a missing label.
inline double ee_loss(const Matrix& probs, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != probs.rows()) throw DomainError("ee_loss: one label per clause required");
  if (labels.empty()) throw DomainError("ee_loss: no clauses");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols()) throw DomainError("ee_loss: missing or invalid label");
    total -= std::log(probs(static_cast<Index>(i), labels[i]));
  }
  return total / static_cast<double>(labels.size());
}

class EmotionModel {
 public:
  EmotionModel() = default;

  EmotionModel(EmotionModelConfig cfg, std::uint64_t seed) : cfg_(cfg), encoder_(make_encoder(cfg.clause_dim)) {
    if (cfg_.vocab_size < static_cast<std::size_t>(Vocabulary::kNumSpecial)) throw ConfigError("emotion model: vocabulary too small");
    std::mt19937_64 rng(seed);
    encoder_->init_params(params_, cfg_.vocab_size, rng);
    for (const char* dir : {"lstm_fwd", "lstm_bwd"}) {
      const std::string name(dir);
      add_linear(params_, name + ".gates", cfg_.clause_dim + cfg_.context_dim, 4 * cfg_.context_dim, rng);
      // Forget-gate bias starts at 1.
      params_.at(name + ".gates.bias").middleCols(cfg_.context_dim, cfg_.context_dim).setOnes();
    }
    add_linear(params_, "classifier", 2 * cfg_.context_dim, kNumEmotionClasses, rng);
  }

  EmotionModel(EmotionModelConfig cfg, ParamStore params)
      : cfg_(cfg), params_(std::move(params)), encoder_(make_encoder(cfg.clause_dim)) {}

  const EmotionModelConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  struct Forward {
    ad::Var clause;
    ad::Var context;
    ad::Var logits;
  };

  Forward forward(ParamBinder& p, const std::vector<std::vector<int>>& clauses, bool train, std::mt19937_64& rng) const {
    if (clauses.empty()) throw DomainError("encode_document: empty document");
    ad::Tape& t = p.tape();
    const Index n = static_cast<Index>(clauses.size());
    const Index dl = cfg_.context_dim;
    Forward f;
    f.clause = encoder_->encode(p, clauses);

    const auto run = [&](const std::string& dir, bool reverse) {
      ad::Var h = t.constant(Matrix::Zero(1, dl));
      ad::Var cell = t.constant(Matrix::Zero(1, dl));
      std::vector<ad::Var> states(static_cast<std::size_t>(n));
      for (Index step = 0; step < n; ++step) {
        const Index i = reverse ? n - 1 - step : step;
        const ad::Var x = ad::slice_rows(f.clause, i, 1);
        const ad::Var gates = linear(p, dir + ".gates", ad::concat_cols(x, h));
        const ad::Var in_gate = ad::sigmoid(ad::slice_cols(gates, 0, dl));
        const ad::Var forget = ad::sigmoid(ad::slice_cols(gates, dl, dl));
        const ad::Var out_gate = ad::sigmoid(ad::slice_cols(gates, 2 * dl, dl));
        const ad::Var cand = ad::tanh(ad::slice_cols(gates, 3 * dl, dl));
        cell = ad::add(ad::mul(forget, cell), ad::mul(in_gate, cand));
        h = ad::mul(out_gate, ad::tanh(cell));
        states[static_cast<std::size_t>(i)] = h;
      }
      ad::Var stacked = states[0];
      for (std::size_t i = 1; i < states.size(); ++i) stacked = ad::concat_rows(stacked, states[i]);
      return stacked;
    };
    f.context = ad::concat_cols(run("lstm_fwd", false), run("lstm_bwd", true));

    ad::Var a = f.context;
    if (train && cfg_.dropout > 0.0) a = ad::mul_const(a, dropout_mask(a.rows(), a.cols(), cfg_.dropout, rng));
    f.logits = linear(p, "classifier", a);
    return f;
  }

  ClauseRepr encode_document(const std::vector<std::vector<int>>& clauses) const {
    ad::Tape tape;
    ParamBinder p(tape, params_, false);
    std::mt19937_64 rng(0);
    const Forward f = forward(p, clauses, false, rng);
    return {f.clause.value(), f.context.value()};
  }

  Matrix classify_clauses(const ClauseRepr& repr) const {
    if (repr.context.cols() != 2 * cfg_.context_dim) throw DomainError("classify_clauses: context dimension mismatch");
    Matrix logits = repr.context * params_.at("classifier.weight").transpose();
    logits.rowwise() += params_.at("classifier.bias").row(0);
    Matrix out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
      const RowVector ex = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
      out.row(i) = ex / ex.sum();
    }
    return out;
  }

  /// Per-clause 7-way probabilities with dropout disabled.
  Matrix predict(const std::vector<std::vector<int>>& clauses) const { return classify_clauses(encode_document(clauses)); }

  /// Mean per-clause cross-entropy over every clause in the batch.
  double loss_and_gradients(const std::vector<LabeledDocument>& batch, std::uint64_t seed, bool train, Gradients* grads) const {
    if (batch.empty()) throw DomainError("emotion model: empty batch");
    ad::Tape tape;
    ParamBinder p(tape, params_, grads != nullptr);
    std::mt19937_64 rng(seed);
    ad::Var logits;
    std::vector<int> labels;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& doc = batch[k];
      if (doc.labels.size() != doc.clauses.size()) throw DomainError("emotion model: one label per clause required");
      for (int l : doc.labels)
        if (l < 0 || l >= kNumEmotionClasses) throw DomainError("emotion model: missing or invalid label");
      const Forward f = forward(p, doc.clauses, train, rng);
      logits = k == 0 ? f.logits : ad::concat_rows(logits, f.logits);
      labels.insert(labels.end(), doc.labels.begin(), doc.labels.end());
    }
    const ad::Var loss = ad::softmax_cross_entropy(logits, labels);
    if (grads) {
      tape.backward(loss);
      *grads = p.gradients();
    }
    return loss.scalar();
  }

  double train_step(const std::vector<LabeledDocument>& batch, Adam& opt, double lr, std::uint64_t seed) {
    Gradients grads;
    const double l = loss_and_gradients(batch, seed, true, &grads);
    if (!std::isfinite(l)) throw TrainingError("ee_loss", "non-finite emotion loss");
    opt.step(params_, grads, lr);
    return l;
  }

 private:
  static std::shared_ptr<const SequenceEncoder> make_encoder(Index dim) {
    return std::make_shared<EmbeddingBagEncoder>("clause_encoder", dim);
  }

  EmotionModelConfig cfg_;
  ParamStore params_;
  std::shared_ptr<const SequenceEncoder> encoder_ = make_encoder(64);
};

}  // namespace carel

#pragma once

// Run configuration: every hyperparameter in one JSON document. Keys use the
// model's symbol where one exists (d, d_h, d_b, d_l, lambda). Unknown keys are
// rejected so typos fail loudly.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "carel/pair_model.hpp"
#include "carel/types.hpp"

namespace carel {

struct StageConfig {
  double learning_rate = 0.0;
  std::size_t batch_size = 1;
  int epochs = 1;
};

struct RunConfig {
  std::uint64_t seed = 13;

  // Pair model
  Index d = 24;     // latent dimension
  Index d_h = 64;   // encoder width
  double lambda = 1.0;
  Regularizer regularizer = Regularizer::mmd;
  KernelSpec kernel = KernelSpec::median_heuristic();
  AdapterMode adapter = AdapterMode::pooled;
  std::string encoder = "embedding-bag";
  LossWeights loss_weights;
  double dropout = 0.5;

  // Emotion model
  Index d_b = 64;   // clause vector width
  Index d_l = 100;  // BiLSTM hidden width per direction

  StageConfig emotion{2e-5, 4, 10};
  StageConfig pair{1e-5, 64, 10};

  // Adaptation
  double emotion_threshold = 0.7;
  int emotion_max_iterations = 50;
  int cd_iterations = 50;
  std::optional<double> cd_learning_rate;  // defaults to pair.learning_rate
  bool fresh_negatives = true;
  bool self_training = true;

  // Inference
  double relation_threshold = 0.5;
  bool category_from_pair_head = false;
  bool use_gold_emotions = false;

  std::size_t min_count = 1;

  double cd_lr() const { return cd_learning_rate.value_or(pair.learning_rate); }

  PairModelConfig pair_model_config(std::size_t vocab_size) const {
    PairModelConfig c;
    c.vocab_size = vocab_size;
    c.hidden_dim = d_h;
    c.latent_dim = d;
    c.adapter = adapter;
    c.regularizer = regularizer;
    c.lambda = lambda;
    c.kernel = kernel;
    c.weights = loss_weights;
    c.dropout = dropout;
    return c;
  }

  void check() const {
    if (d < 1 || d_h < 1 || d_b < 1 || d_l < 1) throw ConfigError("dimensions must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (!(emotion_threshold > 0.0 && emotion_threshold < 1.0)) throw ConfigError("emotion_threshold must be in (0, 1)");
    if (!(relation_threshold >= 0.0 && relation_threshold <= 1.0)) throw ConfigError("relation_threshold must be in [0, 1]");
    if (emotion_max_iterations < 0 || cd_iterations < 0) throw ConfigError("iteration counts must be >= 0");
    for (const auto* s : {&emotion, &pair}) {
      if (!(s->learning_rate > 0.0)) throw ConfigError("learning rates must be > 0");
      if (s->batch_size < 1) throw ConfigError("batch sizes must be >= 1");
      if (s->epochs < 0) throw ConfigError("epochs must be >= 0");
    }
    if (encoder != "embedding-bag") throw ConfigError("unknown encoder: " + encoder);
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key: " + where + k);
}

inline nlohmann::json stage_to_json(const StageConfig& s) {
  return {{"learning_rate", s.learning_rate}, {"batch_size", s.batch_size}, {"epochs", s.epochs}};
}

inline void stage_from_json(const nlohmann::json& j, StageConfig& s, const std::string& where) {
  reject_unknown(j, {"learning_rate", "batch_size", "epochs"}, where);
  if (j.contains("learning_rate")) s.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("batch_size")) s.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("epochs")) s.epochs = j["epochs"].get<int>();
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  const auto& w = c.loss_weights;
  nlohmann::json j = {
      {"seed", c.seed},
      {"d", c.d},
      {"d_h", c.d_h},
      {"d_b", c.d_b},
      {"d_l", c.d_l},
      {"lambda", c.lambda},
      {"regularizer", regularizer_name(c.regularizer)},
      {"adapter", adapter_mode_name(c.adapter)},
      {"encoder", c.encoder},
      {"dropout", c.dropout},
      {"loss_weights",
       {{"recon", w.recon}, {"kl_e", w.kl_e}, {"kl_c", w.kl_c}, {"ce_emotion", w.ce_emotion}, {"ce_event", w.ce_event},
        {"ce_relation", w.ce_relation}}},
      {"emotion_model", detail::stage_to_json(c.emotion)},
      {"pair_model", detail::stage_to_json(c.pair)},
      {"adaptation",
       {{"emotion_threshold", c.emotion_threshold},
        {"emotion_max_iterations", c.emotion_max_iterations},
        {"cd_iterations", c.cd_iterations},
        {"fresh_negatives", c.fresh_negatives},
        {"self_training", c.self_training}}},
      {"relation_threshold", c.relation_threshold},
      {"category_from_pair_head", c.category_from_pair_head},
      {"use_gold_emotions", c.use_gold_emotions},
      {"min_count", c.min_count},
  };
  j["kernel_bandwidth"] = c.kernel.uses_median() ? nlohmann::json("median-heuristic") : nlohmann::json(c.kernel.numeric());
  j["adaptation"]["learning_rate"] = c.cd_learning_rate ? nlohmann::json(*c.cd_learning_rate) : nlohmann::json(nullptr);
  return j;
}

/// Missing keys keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  try {
    detail::reject_unknown(j,
                           {"seed", "d", "d_h", "d_b", "d_l", "lambda", "regularizer", "kernel_bandwidth", "adapter", "encoder",
                            "dropout", "loss_weights", "emotion_model", "pair_model", "adaptation", "relation_threshold",
                            "category_from_pair_head", "use_gold_emotions", "min_count"},
                           "");
    RunConfig c;
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("d", c.d);
    get("d_h", c.d_h);
    get("d_b", c.d_b);
    get("d_l", c.d_l);
    get("lambda", c.lambda);
    get("encoder", c.encoder);
    get("dropout", c.dropout);
    get("relation_threshold", c.relation_threshold);
    get("category_from_pair_head", c.category_from_pair_head);
    get("use_gold_emotions", c.use_gold_emotions);
    get("min_count", c.min_count);
    if (j.contains("regularizer")) c.regularizer = regularizer_from_name(j["regularizer"].get<std::string>());
    if (j.contains("adapter")) c.adapter = adapter_mode_from_name(j["adapter"].get<std::string>());
    if (j.contains("kernel_bandwidth")) {
      const auto& k = j["kernel_bandwidth"];
      if (k.is_string()) {
        if (k.get<std::string>() != "median-heuristic") throw ConfigError("kernel_bandwidth: expected a number or \"median-heuristic\"");
        c.kernel = KernelSpec::median_heuristic();
      } else {
        c.kernel = KernelSpec::rbf(k.get<double>());
      }
    }
    if (j.contains("loss_weights")) {
      const auto& w = j["loss_weights"];
      detail::reject_unknown(w, {"recon", "kl_e", "kl_c", "ce_emotion", "ce_event", "ce_relation"}, "loss_weights.");
      auto& lw = c.loss_weights;
      for (auto [key, field] : {std::pair{"recon", &lw.recon}, {"kl_e", &lw.kl_e}, {"kl_c", &lw.kl_c},
                                {"ce_emotion", &lw.ce_emotion}, {"ce_event", &lw.ce_event}, {"ce_relation", &lw.ce_relation}})
        if (w.contains(key)) *field = w[key].get<double>();
    }
    if (j.contains("emotion_model")) detail::stage_from_json(j["emotion_model"], c.emotion, "emotion_model.");
    if (j.contains("pair_model")) detail::stage_from_json(j["pair_model"], c.pair, "pair_model.");
    if (j.contains("adaptation")) {
      const auto& a = j["adaptation"];
      detail::reject_unknown(a, {"emotion_threshold", "emotion_max_iterations", "cd_iterations", "fresh_negatives", "self_training",
                                 "learning_rate"},
                             "adaptation.");
      if (a.contains("emotion_threshold")) c.emotion_threshold = a["emotion_threshold"].get<double>();
      if (a.contains("emotion_max_iterations")) c.emotion_max_iterations = a["emotion_max_iterations"].get<int>();
      if (a.contains("cd_iterations")) c.cd_iterations = a["cd_iterations"].get<int>();
      if (a.contains("fresh_negatives")) c.fresh_negatives = a["fresh_negatives"].get<bool>();
      if (a.contains("self_training")) c.self_training = a["self_training"].get<bool>();
      if (a.contains("learning_rate") && !a["learning_rate"].is_null()) c.cd_learning_rate = a["learning_rate"].get<double>();
    }
    c.check();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace carel

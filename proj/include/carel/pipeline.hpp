#pragma once

// End-to-end plumbing: source training, target adaptation, pair inference,
// evaluation reports, embedding export and bundle checkpoints.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carel/adaptation.hpp"
#include "carel/checkpoint.hpp"
#include "carel/config.hpp"
#include "carel/emotion_model.hpp"
#include "carel/metrics.hpp"
#include "carel/pair_model.hpp"

namespace carel {

inline constexpr const char* kBundleFormat = "carel-bundle/1";

// Sub-seed tags.
enum SeedTag : std::uint64_t {
  kSeedEmotionInit = 1,
  kSeedPairInit,
  kSeedEmotionTrain,
  kSeedPairTrain,
  kSeedEmotionSelfTrain,
  kSeedCdSelfTrain,
};

/// Everything needed to run inference: config, vocabulary and both models.
struct Bundle {
  RunConfig config;
  std::string source_domain;
  Vocabulary vocab;
  EmotionModel emotion;
  PairModel pair;
};

inline EmotionModelConfig emotion_model_config(const RunConfig& c, std::size_t vocab_size) {
  return {vocab_size, c.d_b, c.d_l, c.dropout};
}

inline nlohmann::json to_json(const Bundle& b) {
  return {{"format", kBundleFormat},
          {"config", to_json(b.config)},
          {"source_domain", b.source_domain},
          {"vocab", b.vocab.words()},
          {"emotion_model", to_json(b.emotion.params())},
          {"pair_model", to_json(b.pair.params())}};
}

inline Bundle bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kBundleFormat) throw ParseError("checkpoint: unsupported format");
    Bundle b;
    b.config = run_config_from_json(j.at("config"));
    b.source_domain = j.at("source_domain").get<std::string>();
    b.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
    b.emotion = EmotionModel(emotion_model_config(b.config, b.vocab.size()), param_store_from_json(j.at("emotion_model")));
    b.pair = PairModel(b.config.pair_model_config(b.vocab.size()), param_store_from_json(j.at("pair_model")));
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_bundle(const Bundle& b, const std::string& path) { write_json_file(to_json(b), path); }
inline Bundle load_bundle(const std::string& path) { return bundle_from_json(read_json_file(path)); }

inline std::string single_domain(const std::vector<Document>& docs, const std::string& what) {
  if (docs.empty()) throw ConfigError(what + " corpus is empty");
  for (const auto& d : docs)
    if (d.domain != docs.front().domain) throw ConfigError(what + " corpus mixes domains");
  return docs.front().domain;
}

/// Labeled source pairs: every gold pair as a positive plus one sampled
/// negative per gold pair (resampled per `seed`).
inline std::vector<PairExample> source_pair_examples(const std::vector<Document>& docs, const Vocabulary& vocab,
                                                     std::uint64_t seed) {
  std::vector<PairExample> out;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    const auto& d = docs[k];
    for (const auto& gp : d.gold_pairs)
      out.push_back(make_pair_example(d, gp.emotion_clause, gp.cause_clause, gp.category, true, vocab));
    for (const auto& neg : sample_source_negatives(d, derive_seed(seed, k), k))
      out.push_back(make_pair_example(d, neg.emotion_clause, neg.candidate_clause, neg.category, false, vocab));
  }
  return out;
}

/// Trains both models on the labeled source corpus. `unlabeled` only
/// contributes to the vocabulary.
inline Bundle train_source(const RunConfig& cfg, const std::vector<Document>& source,
                           const std::vector<Document>& unlabeled = {}) {
  cfg.check();
  Bundle b;
  b.config = cfg;
  b.source_domain = single_domain(source, "source");
  std::vector<Document> all = source;
  all.insert(all.end(), unlabeled.begin(), unlabeled.end());
  b.vocab = build_vocab(all, cfg.min_count);

  b.emotion = EmotionModel(emotion_model_config(cfg, b.vocab.size()), derive_seed(cfg.seed, kSeedEmotionInit));
  b.pair = PairModel(cfg.pair_model_config(b.vocab.size()), derive_seed(cfg.seed, kSeedPairInit));

  std::vector<LabeledDocument> labeled;
  for (const auto& d : source) labeled.push_back(labeled_document(d, b.vocab));
  Adam opt_e;
  const std::uint64_t se = derive_seed(cfg.seed, kSeedEmotionTrain);
  for (int ep = 0; ep < cfg.emotion.epochs; ++ep)
    train_emotion_epoch(b.emotion, opt_e, labeled, {cfg.emotion.learning_rate, cfg.emotion.batch_size},
                        derive_seed(se, static_cast<std::uint64_t>(ep)));

  Adam opt_p;
  const std::uint64_t sp = derive_seed(cfg.seed, kSeedPairTrain);
  for (int ep = 0; ep < cfg.pair.epochs; ++ep) {
    const std::uint64_t s = derive_seed(sp, static_cast<std::uint64_t>(ep));
    train_pair_epoch(b.pair, opt_p, source_pair_examples(source, b.vocab, s), {cfg.pair.learning_rate, cfg.pair.batch_size},
                     derive_seed(s, 1));
  }
  return b;
}

/// Emotion clauses per document: argmax != None from the emotion model, or
/// the gold labels when `gold` is set.
inline std::vector<EmotionAnnotated> annotate_emotions(const Bundle& b, const std::vector<Document>& docs, bool gold) {
  std::vector<EmotionAnnotated> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    EmotionAnnotated a{&d, {}};
    std::vector<Emotion> labels;
    if (gold) {
      labels = d.emotion_labels();
    } else {
      const Matrix probs = b.emotion.predict(encode_clauses(d, b.vocab));
      for (Index i = 0; i < probs.rows(); ++i) {
        Index k = 0;
        probs.row(i).maxCoeff(&k);
        labels.push_back(static_cast<Emotion>(k));
      }
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] != Emotion::none) a.emotions.push_back({static_cast<int>(i), labels[i]});
    out.push_back(std::move(a));
  }
  return out;
}

struct AdaptReport {
  EmotionSelfTrainResult emotion;
  CdSelfTrainResult cd;
};

/// Emotion self-training on source + target, then CD-SelfTrain on the target
/// with the adapted emotion model's clauses (or gold ones when configured).
inline AdaptReport adapt(Bundle& b, const std::vector<Document>& source, const std::vector<Document>& target,
                         std::ostream* log = nullptr) {
  const RunConfig& cfg = b.config;
  AdaptReport rep;
  if (target.empty()) throw AdaptationError("adapt: empty target corpus");
  if (!cfg.self_training) return rep;

  if (cfg.emotion_max_iterations > 0) {
    Adam opt_e;
    EmotionSelfTrainConfig ec;
    ec.threshold = cfg.emotion_threshold;
    ec.max_iterations = cfg.emotion_max_iterations;
    ec.schedule = {cfg.emotion.learning_rate, cfg.emotion.batch_size};
    ec.seed = derive_seed(cfg.seed, kSeedEmotionSelfTrain);
    rep.emotion = emotion_self_train(b.emotion, opt_e, source, target, b.vocab, ec);
  }
  if (cfg.cd_iterations > 0) {
    Adam opt_p;
    CdSelfTrainConfig cc;
    cc.max_iterations = cfg.cd_iterations;
    cc.schedule = {cfg.cd_lr(), cfg.pair.batch_size};
    cc.seed = derive_seed(cfg.seed, kSeedCdSelfTrain);
    cc.fresh_negatives = cfg.fresh_negatives;
    rep.cd = cd_self_train(b.pair, opt_p, annotate_emotions(b, target, cfg.use_gold_emotions), b.vocab, cc, log);
  }
  return rep;
}

/// Index of the highest-probability candidate (lowest index on ties) if it
/// reaches `threshold`.
inline std::optional<std::size_t> select_candidate(const std::vector<double>& probs, double threshold) {
  if (probs.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  if (probs[best] < threshold) return std::nullopt;
  return best;
}

/// Per emotion clause, the argmax-probability candidate (itself included) if
/// its relation probability reaches `threshold`.
inline std::vector<PairTuple> predict_pairs(const PairModel& model, const Vocabulary& vocab,
                                            const std::vector<EmotionAnnotated>& docs, double threshold,
                                            bool category_from_pair_head = false) {
  std::vector<PairTuple> out;
  for (const auto& a : docs) {
    const Document& d = *a.doc;
    for (const auto& e : a.emotions) {
      std::vector<std::vector<int>> seqs;
      for (const auto& c : d.clauses) seqs.push_back(vocab.encode(build_pair_input(d.clauses[static_cast<std::size_t>(e.clause)], c)));
      const auto pick = select_candidate(model.relation_probabilities(seqs), threshold);
      if (!pick) continue;
      const std::size_t best = *pick;
      Emotion cat = e.category;
      if (category_from_pair_head) {
        const Matrix p = model.emotion_probabilities({seqs[best]});
        Index k = 1;
        p.row(0).tail(kNumEmotionClasses - 1).maxCoeff(&k);
        cat = static_cast<Emotion>(k + 1);
      }
      out.push_back({d.doc_id, e.clause, static_cast<int>(best), cat});
    }
  }
  return out;
}

inline std::vector<PairTuple> gold_pairs(const std::vector<Document>& docs) {
  std::vector<PairTuple> out;
  for (const auto& d : docs)
    for (const auto& gp : d.gold_pairs) out.push_back({d.doc_id, gp.emotion_clause, gp.cause_clause, gp.category});
  return out;
}

/// Report rows: per target domain one EE row and ECPE rows for all / normal /
/// self-chain; with several domains, weighted-average rows follow.
inline std::vector<MetricsReport> evaluate(const Bundle& b, const std::vector<Document>& docs) {
  if (docs.empty()) throw ConfigError("evaluate: empty corpus");
  std::map<std::string, std::vector<Document>> by_domain;
  for (const auto& d : docs) by_domain[d.domain].push_back(d);

  std::vector<MetricsReport> rows;
  std::map<std::string, std::vector<MetricsReport>> per_kind;
  const auto emit = [&](MetricsReport r, const std::string& target, const std::string& kind) {
    r.source = b.source_domain;
    r.target = target;
    rows.push_back(r);
    per_kind[kind].push_back(r);
  };
  for (const auto& [domain, group] : by_domain) {
    const auto predicted = annotate_emotions(b, group, false);
    std::vector<std::vector<Emotion>> pred_ee, gold_ee;
    for (std::size_t k = 0; k < group.size(); ++k) {
      std::vector<Emotion> p(group[k].clauses.size(), Emotion::none);
      for (const auto& e : predicted[k].emotions) p[static_cast<std::size_t>(e.clause)] = e.category;
      pred_ee.push_back(std::move(p));
      gold_ee.push_back(group[k].emotion_labels());
    }
    emit(score_ee(pred_ee, gold_ee), domain, "ee");

    const auto annotated = b.config.use_gold_emotions ? annotate_emotions(b, group, true) : predicted;
    const auto pairs = predict_pairs(b.pair, b.vocab, annotated, b.config.relation_threshold, b.config.category_from_pair_head);
    const EcpeScores s = score_ecpe(pairs, gold_pairs(group));
    emit(s.all, domain, "all");
    emit(s.normal, domain, "normal");
    emit(s.self_chain, domain, "self-chain");
  }
  if (by_domain.size() > 1)
    for (const char* kind : {"ee", "all", "normal", "self-chain"}) {
      std::vector<MetricsReport> group = per_kind[kind];
      std::size_t gold = 0;
      for (const auto& r : group) gold += r.n_gold;
      if (gold > 0) rows.push_back(weighted_average(group));
    }
  return rows;
}

inline void write_report_csv(const std::vector<MetricsReport>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write report: " + path);
  write_report_csv(rows, out);
}

/// One row per exported vector: the posterior means of the emotion and the
/// cause latent for every gold pair.
inline void export_embeddings(const PairModel& model, const Vocabulary& vocab, const std::vector<Document>& docs,
                              std::ostream& out) {
  const Index d = model.config().latent_dim;
  out << "doc_id,domain,item,vector";
  for (Index k = 0; k < d; ++k) out << ",v" << k;
  out << '\n';
  char buf[32];
  for (const auto& doc : docs)
    for (const auto& gp : doc.gold_pairs) {
      const auto seq = vocab.encode(build_pair_input(doc.clauses[static_cast<std::size_t>(gp.emotion_clause)],
                                                     doc.clauses[static_cast<std::size_t>(gp.cause_clause)]));
      const LatentPair lp = model.variational_encode({seq}).front();
      const std::string item = "e" + std::to_string(gp.emotion_clause) + "-c" + std::to_string(gp.cause_clause);
      for (const auto& [name, vec] : {std::pair<const char*, const Vector*>{"mu_e", &lp.q_e.mean()}, {"mu_c", &lp.q_c.mean()}}) {
        out << doc.doc_id << ',' << doc.domain << ',' << item << ',' << name;
        for (Index k = 0; k < d; ++k) {
          std::snprintf(buf, sizeof buf, ",%.17g", (*vec)(k));
          out << buf;
        }
        out << '\n';
      }
    }
}

inline void export_embeddings(const PairModel& model, const Vocabulary& vocab, const std::vector<Document>& docs,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write embeddings: " + path);
  export_embeddings(model, vocab, docs, out);
  if (!out) throw ParseError("write failed: " + path);
}

}  // namespace carel

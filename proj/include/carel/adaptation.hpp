#pragma once

// Self-training to an unlabeled target domain: threshold-based emotion
// self-training, and CD-SelfTrain for the relation model, which rebuilds its
// pseudo-labeled pair set from scratch on every iteration.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "carel/corpus.hpp"
#include "carel/emotion_model.hpp"
#include "carel/pair_model.hpp"

namespace carel {

/// Mixes a base seed with a stream tag so sub-streams are independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct CandidatePair {
  std::size_t doc_index = 0;
  int emotion_clause = 0;
  int candidate_clause = 0;
  Emotion category = Emotion::happiness;
  double relation_probability = 0.0;

  bool same_pair(const CandidatePair& o) const {
    return doc_index == o.doc_index && emotion_clause == o.emotion_clause && candidate_clause == o.candidate_clause;
  }
};

struct EmotionClause {
  int clause = 0;
  Emotion category = Emotion::happiness;
};

/// A document together with the emotion clauses assigned to it (predicted
/// or gold).
struct EmotionAnnotated {
  const Document* doc = nullptr;
  std::vector<EmotionClause> emotions;
};

/// {emotion clause} x {every clause of the document, itself included}.
inline std::vector<CandidatePair> build_candidates(const Document& doc, const std::vector<EmotionClause>& emotions,
                                                   std::size_t doc_index = 0) {
  std::vector<CandidatePair> out;
  const int n = static_cast<int>(doc.clauses.size());
  for (const auto& e : emotions) {
    if (e.clause < 0 || e.clause >= n) throw DomainError("build_candidates: emotion clause out of range");
    for (int c = 0; c < n; ++c) out.push_back({doc_index, e.clause, c, e.category, 0.0});
  }
  return out;
}

struct PseudoLabelSet {
  int iteration = 0;
  std::vector<CandidatePair> positives;
  std::vector<CandidatePair> negatives;
  std::uint64_t seed = 0;
};

/// Per document group: the argmax-probability candidate is the positive
/// (ties go to the lowest candidate clause index, then the lowest emotion
/// clause index); one of the rest, drawn uniformly, is the negative.
inline PseudoLabelSet construct_pseudo_set(const std::vector<std::vector<CandidatePair>>& groups, std::uint64_t seed,
                                           int iteration = 0) {
  PseudoLabelSet set;
  set.iteration = iteration;
  set.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& group : groups) {
    if (group.empty()) continue;
    std::size_t best = 0;
    for (std::size_t k = 1; k < group.size(); ++k) {
      const auto& a = group[k];
      const auto& b = group[best];
      if (a.relation_probability > b.relation_probability ||
          (a.relation_probability == b.relation_probability &&
           std::tie(a.candidate_clause, a.emotion_clause) < std::tie(b.candidate_clause, b.emotion_clause)))
        best = k;
    }
    set.positives.push_back(group[best]);
    if (group.size() < 2) continue;
    std::size_t pick = std::uniform_int_distribution<std::size_t>(0, group.size() - 2)(rng);
    if (pick >= best) ++pick;
    set.negatives.push_back(group[pick]);
  }
  return set;
}

/// For each gold pair, one uniformly drawn pairing of its emotion clause with
/// a clause that is not a gold cause of that emotion clause.
inline std::vector<CandidatePair> sample_source_negatives(const Document& doc, std::uint64_t seed, std::size_t doc_index = 0) {
  std::mt19937_64 rng(seed);
  std::vector<CandidatePair> out;
  const int n = static_cast<int>(doc.clauses.size());
  for (const auto& gp : doc.gold_pairs) {
    std::vector<int> eligible;
    for (int c = 0; c < n; ++c) {
      bool is_cause = false;
      for (const auto& other : doc.gold_pairs)
        is_cause = is_cause || (other.emotion_clause == gp.emotion_clause && other.cause_clause == c);
      if (!is_cause) eligible.push_back(c);
    }
    if (eligible.empty()) continue;
    const int c = eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)];
    out.push_back({doc_index, gp.emotion_clause, c, gp.category, 0.0});
  }
  return out;
}

inline PairExample make_pair_example(const Document& doc, int emotion_clause, int candidate_clause, Emotion category,
                                     bool related, const Vocabulary& vocab) {
  PairExample ex;
  ex.tokens = vocab.encode(build_pair_input(doc.clauses[static_cast<std::size_t>(emotion_clause)],
                                            doc.clauses[static_cast<std::size_t>(candidate_clause)]));
  ex.emotion = static_cast<int>(category);
  ex.event = related ? 1 : 0;
  ex.relation = related ? 1 : 0;
  return ex;
}

inline std::vector<std::vector<int>> encode_clauses(const Document& doc, const Vocabulary& vocab) {
  std::vector<std::vector<int>> out;
  out.reserve(doc.clauses.size());
  for (const auto& c : doc.clauses) out.push_back(vocab.encode(c));
  return out;
}

inline LabeledDocument labeled_document(const Document& doc, const Vocabulary& vocab) {
  LabeledDocument out{encode_clauses(doc, vocab), {}};
  for (auto e : doc.emotion_labels()) out.labels.push_back(static_cast<int>(e));
  return out;
}

/// Shuffled mini-batches of indices [0, n).
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += std::max<std::size_t>(batch_size, 1))
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + std::max<std::size_t>(batch_size, 1))));
  return out;
}

struct TrainSchedule {
  double learning_rate = 1e-3;
  std::size_t batch_size = 4;
};

/// One pass over `docs` in shuffled mini-batches. Returns the mean batch loss.
inline double train_emotion_epoch(EmotionModel& model, Adam& opt, const std::vector<LabeledDocument>& docs,
                                  const TrainSchedule& sched, std::uint64_t seed) {
  if (docs.empty()) return 0.0;
  double total = 0.0;
  const auto batches = make_batches(docs.size(), sched.batch_size, seed);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    std::vector<LabeledDocument> batch;
    for (auto i : batches[b]) batch.push_back(docs[i]);
    total += model.train_step(batch, opt, sched.learning_rate, derive_seed(seed, b));
  }
  return total / static_cast<double>(batches.size());
}

inline LossBreakdown train_pair_epoch(PairModel& model, Adam& opt, const std::vector<PairExample>& examples,
                                      const TrainSchedule& sched, std::uint64_t seed) {
  LossBreakdown mean;
  if (examples.empty()) return mean;
  const auto batches = make_batches(examples.size(), sched.batch_size, seed);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    std::vector<PairExample> batch;
    for (auto i : batches[b]) batch.push_back(examples[i]);
    const LossBreakdown lb = model.train_step(batch, opt, sched.learning_rate, derive_seed(seed, b));
    mean.recon += lb.recon;
    mean.kl_e += lb.kl_e;
    mean.kl_c += lb.kl_c;
    mean.ce_emotion += lb.ce_emotion;
    mean.ce_event += lb.ce_event;
    mean.ce_relation += lb.ce_relation;
    mean.regularizer += lb.regularizer;
    mean.total += lb.total;
  }
  const double k = static_cast<double>(batches.size());
  for (double* v : {&mean.recon, &mean.kl_e, &mean.kl_c, &mean.ce_emotion, &mean.ce_event, &mean.ce_relation,
                    &mean.regularizer, &mean.total})
    *v /= k;
  return mean;
}

// ---------------------------------------------------------------------------
// Emotion self-training
// ---------------------------------------------------------------------------

/// If the strongest non-None prediction in the document reaches the
/// threshold, label that one clause with its predicted emotion and every
/// other clause None.
inline std::optional<std::vector<int>> pseudo_label_emotions(const Matrix& probs, double threshold) {
  double best = -1.0;
  Index best_clause = 0;
  Index best_class = 1;
  for (Index i = 0; i < probs.rows(); ++i)
    for (Index k = 1; k < probs.cols(); ++k)
      if (probs(i, k) > best) {
        best = probs(i, k);
        best_clause = i;
        best_class = k;
      }
  if (best < threshold) return std::nullopt;
  std::vector<int> labels(static_cast<std::size_t>(probs.rows()), 0);
  labels[static_cast<std::size_t>(best_clause)] = static_cast<int>(best_class);
  return labels;
}

/// Labeled set S keyed by document; re-inserting a key replaces the entry.
class SelfTrainState {
 public:
  void add(const std::string& key, LabeledDocument doc) { set_[key] = std::move(doc); }
  std::size_t size() const { return set_.size(); }
  bool contains(const std::string& key) const { return set_.count(key) != 0; }
  const LabeledDocument& at(const std::string& key) const { return set_.at(key); }

  std::vector<LabeledDocument> documents() const {
    std::vector<LabeledDocument> out;
    out.reserve(set_.size());
    for (const auto& [_, d] : set_) out.push_back(d);
    return out;
  }

 private:
  std::map<std::string, LabeledDocument> set_;
};

struct EmotionSelfTrainConfig {
  double threshold = 0.7;
  int max_iterations = 50;
  TrainSchedule schedule{2e-5, 4};
  std::uint64_t seed = 0;
};

struct EmotionSelfTrainResult {
  int iterations = 0;
  std::size_t initial_size = 0;
  std::size_t final_size = 0;
  std::vector<std::size_t> sizes;  // |S| after each iteration
  /// Latest pseudo-labels per target doc_id.
  std::map<std::string, std::vector<int>> pseudo_labels;
};

inline EmotionSelfTrainResult emotion_self_train(EmotionModel& model, Adam& opt, const std::vector<Document>& source,
                                                 const std::vector<Document>& target, const Vocabulary& vocab,
                                                 const EmotionSelfTrainConfig& cfg) {
  if (source.empty()) throw ConfigError("emotion self-training: empty source set");
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("emotion self-training: threshold must be in (0, 1)");
  SelfTrainState s;
  for (const auto& d : source) s.add("source:" + d.doc_id, labeled_document(d, vocab));
  std::vector<std::vector<std::vector<int>>> target_ids;
  for (const auto& d : target) target_ids.push_back(encode_clauses(d, vocab));

  EmotionSelfTrainResult res;
  res.initial_size = s.size();
  for (int it = 0; it < cfg.max_iterations; ++it) {
    train_emotion_epoch(model, opt, s.documents(), cfg.schedule, derive_seed(cfg.seed, static_cast<std::uint64_t>(it)));
    ++res.iterations;
    const std::size_t before = s.size();
    bool any = false;
    for (std::size_t k = 0; k < target.size(); ++k) {
      auto labels = pseudo_label_emotions(model.predict(target_ids[k]), cfg.threshold);
      if (!labels) continue;
      any = true;
      res.pseudo_labels[target[k].doc_id] = *labels;
      s.add("target:" + target[k].doc_id, LabeledDocument{target_ids[k], *labels});
    }
    res.sizes.push_back(s.size());
    if (!any || s.size() == before) break;
  }
  res.final_size = s.size();
  return res;
}

// ---------------------------------------------------------------------------
// CD-SelfTrain
// ---------------------------------------------------------------------------

struct IterationLog {
  int iteration = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double changed_positive_fraction = 0.0;
  double changed_fraction = 0.0;

  nlohmann::json to_json() const {
    return {{"iteration", iteration},
            {"positives", positives},
            {"negatives", negatives},
            {"changed_positive_fraction", changed_positive_fraction},
            {"changed_fraction", changed_fraction}};
  }
};

struct CdSelfTrainConfig {
  int max_iterations = 50;
  TrainSchedule schedule{1e-5, 64};
  std::uint64_t seed = 0;
  /// false keeps each document's first negative (the fixed-negatives ablation).
  bool fresh_negatives = true;
};

struct CdSelfTrainResult {
  std::vector<IterationLog> log;
  std::vector<PseudoLabelSet> sets;
};

namespace detail {

inline double changed_fraction(const std::vector<CandidatePair>& now, const std::vector<CandidatePair>& before) {
  if (now.empty()) return 0.0;
  std::size_t changed = 0;
  for (const auto& c : now) {
    bool found = false;
    for (const auto& b : before) found = found || c.same_pair(b);
    changed += !found;
  }
  return static_cast<double>(changed) / static_cast<double>(now.size());
}

}  // namespace detail

/// Each iteration scores every candidate with the model as of the start of
/// the iteration, builds a fresh pseudo-labeled set, and fine-tunes for one
/// epoch with the full training loss. The first iteration's change fractions
/// are 1 (everything is new).
inline CdSelfTrainResult cd_self_train(PairModel& model, Adam& opt, const std::vector<EmotionAnnotated>& docs,
                                       const Vocabulary& vocab, const CdSelfTrainConfig& cfg, std::ostream* log = nullptr,
                                       bool keep_sets = false) {
  CdSelfTrainResult res;
  if (cfg.max_iterations <= 0) return res;

  std::vector<std::vector<CandidatePair>> groups;
  std::vector<std::vector<int>> seqs;
  std::vector<std::pair<std::size_t, std::size_t>> where;  // (group, slot) per sequence
  for (std::size_t k = 0; k < docs.size(); ++k) {
    if (docs[k].emotions.empty()) continue;
    auto cands = build_candidates(*docs[k].doc, docs[k].emotions, k);
    for (std::size_t s = 0; s < cands.size(); ++s) {
      const auto& c = cands[s];
      seqs.push_back(vocab.encode(build_pair_input(docs[k].doc->clauses[static_cast<std::size_t>(c.emotion_clause)],
                                                   docs[k].doc->clauses[static_cast<std::size_t>(c.candidate_clause)])));
      where.emplace_back(groups.size(), s);
    }
    groups.push_back(std::move(cands));
  }
  if (seqs.empty()) throw AdaptationError("CD-SelfTrain: no candidate pairs (no document has an emotion clause)");

  PseudoLabelSet previous;
  std::map<std::size_t, CandidatePair> first_negatives;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const auto probs = model.relation_probabilities(seqs);
    for (std::size_t q = 0; q < seqs.size(); ++q) groups[where[q].first][where[q].second].relation_probability = probs[q];

    const std::uint64_t it_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(it));
    PseudoLabelSet set = construct_pseudo_set(groups, it_seed, it);
    if (!cfg.fresh_negatives) {
      for (auto& neg : set.negatives) {
        auto [pos, inserted] = first_negatives.try_emplace(neg.doc_index, neg);
        if (inserted) continue;
        bool clashes = false;
        for (const auto& p : set.positives) clashes = clashes || p.same_pair(pos->second);
        if (!clashes) neg = pos->second;
      }
    }

    IterationLog entry;
    entry.iteration = it;
    entry.positives = set.positives.size();
    entry.negatives = set.negatives.size();
    if (it == 0) {
      entry.changed_positive_fraction = entry.changed_fraction = 1.0;
    } else {
      entry.changed_positive_fraction = detail::changed_fraction(set.positives, previous.positives);
      std::vector<CandidatePair> now = set.positives, before = previous.positives;
      now.insert(now.end(), set.negatives.begin(), set.negatives.end());
      before.insert(before.end(), previous.negatives.begin(), previous.negatives.end());
      // Relabeling counts as a change: compare positives and negatives separately.
      const double changed_pos = detail::changed_fraction(set.positives, previous.positives) * static_cast<double>(set.positives.size());
      const double changed_neg = detail::changed_fraction(set.negatives, previous.negatives) * static_cast<double>(set.negatives.size());
      entry.changed_fraction = now.empty() ? 0.0 : (changed_pos + changed_neg) / static_cast<double>(now.size());
    }
    res.log.push_back(entry);
    if (log) *log << entry.to_json().dump() << '\n';

    std::vector<PairExample> examples;
    for (const auto& p : set.positives)
      examples.push_back(make_pair_example(*docs[p.doc_index].doc, p.emotion_clause, p.candidate_clause, p.category, true, vocab));
    for (const auto& n : set.negatives)
      examples.push_back(make_pair_example(*docs[n.doc_index].doc, n.emotion_clause, n.candidate_clause, n.category, false, vocab));
    train_pair_epoch(model, opt, examples, cfg.schedule, derive_seed(it_seed, 1));

    if (keep_sets) res.sets.push_back(set);
    previous = std::move(set);
  }
  return res;
}

}  // namespace carel

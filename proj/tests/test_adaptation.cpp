#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "carel/adaptation.hpp"

namespace carel {
namespace {

Document doc_with_clauses(int n, const std::string& id = "d") {
  Document d;
  d.doc_id = id;
  d.domain = "x";
  for (int i = 0; i < n; ++i) d.clauses.push_back({"t" + std::to_string(i)});
  return d;
}

std::vector<CandidatePair> scored(std::initializer_list<double> probs, std::size_t doc = 0) {
  std::vector<CandidatePair> out;
  int c = 0;
  for (double p : probs) out.push_back({doc, 0, c++, Emotion::anger, p});
  return out;
}

TEST(BuildCandidatesTest, Counting) {
  EXPECT_EQ(build_candidates(doc_with_clauses(4), {{1, Emotion::fear}}).size(), 4u);
  EXPECT_EQ(build_candidates(doc_with_clauses(3), {{0, Emotion::fear}, {2, Emotion::anger}}).size(), 6u);
  EXPECT_TRUE(build_candidates(doc_with_clauses(3), {}).empty());
}

TEST(BuildCandidatesTest, IncludesSelfPair) {
  const auto c = build_candidates(doc_with_clauses(3), {{2, Emotion::sadness}});
  bool self = false;
  for (const auto& p : c) self = self || (p.emotion_clause == 2 && p.candidate_clause == 2);
  EXPECT_TRUE(self);
  EXPECT_EQ(c.front().category, Emotion::sadness);
}

TEST(PseudoSetTest, ArgmaxPositiveAndSeededNegative) {
  std::set<int> negatives_seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto set = construct_pseudo_set({scored({0.9, 0.3, 0.6})}, seed);
    ASSERT_EQ(set.positives.size(), 1u);
    ASSERT_EQ(set.negatives.size(), 1u);
    EXPECT_EQ(set.positives[0].candidate_clause, 0);
    const int neg = set.negatives[0].candidate_clause;
    EXPECT_TRUE(neg == 1 || neg == 2);
    negatives_seen.insert(neg);
    // Same seed, same draw.
    EXPECT_EQ(construct_pseudo_set({scored({0.9, 0.3, 0.6})}, seed).negatives[0].candidate_clause, neg);
  }
  EXPECT_EQ(negatives_seen.size(), 2u);
}

TEST(PseudoSetTest, TieGoesToLowerIndex) {
  const auto set = construct_pseudo_set({scored({0.5, 0.5})}, 3);
  EXPECT_EQ(set.positives[0].candidate_clause, 0);
  EXPECT_EQ(set.negatives[0].candidate_clause, 1);
}

TEST(PseudoSetTest, SingleCandidateGivesNoNegative) {
  const auto set = construct_pseudo_set({scored({0.2})}, 3);
  EXPECT_EQ(set.positives.size(), 1u);
  EXPECT_TRUE(set.negatives.empty());
}

TEST(PseudoSetTest, PositiveIsMaximalAndDiffersFromNegative) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::vector<CandidatePair>> groups;
    for (std::size_t d = 0; d < 5; ++d) {
      std::vector<CandidatePair> g;
      for (int c = 0; c < 2 + t % 4; ++c) g.push_back({d, 1, c, Emotion::fear, u(rng)});
      groups.push_back(g);
    }
    const auto set = construct_pseudo_set(groups, static_cast<std::uint64_t>(t));
    for (std::size_t d = 0; d < 5; ++d) {
      for (const auto& c : groups[d]) EXPECT_GE(set.positives[d].relation_probability, c.relation_probability);
      EXPECT_FALSE(set.positives[d].same_pair(set.negatives[d]));
    }
  }
}

TEST(SourceNegativesTest, DrawsFromNonCauses) {
  Document d = doc_with_clauses(3);
  d.gold_pairs = {{1, 0, Emotion::happiness}};
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto negs = sample_source_negatives(d, seed);
    ASSERT_EQ(negs.size(), 1u);
    EXPECT_EQ(negs[0].emotion_clause, 1);
    EXPECT_TRUE(negs[0].candidate_clause == 1 || negs[0].candidate_clause == 2);
    seen.insert(negs[0].candidate_clause);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(SourceNegativesTest, DegenerateAndCounting) {
  Document all = doc_with_clauses(2);
  all.gold_pairs = {{1, 0, Emotion::anger}, {1, 1, Emotion::anger}};
  EXPECT_TRUE(sample_source_negatives(all, 1).empty());

  Document two = doc_with_clauses(5);
  two.gold_pairs = {{2, 0, Emotion::anger}, {4, 3, Emotion::fear}};
  EXPECT_EQ(sample_source_negatives(two, 1).size(), 2u);
}

TEST(EmotionPseudoLabelTest, HighestNonNoneClauseOnly) {
  Matrix p = Matrix::Zero(2, 7);
  p.row(0) << 0.1, 0.8, 0.02, 0.02, 0.02, 0.02, 0.02;
  p.row(1) << 0.6, 0.05, 0.3, 0.05, 0.0, 0.0, 0.0;
  const auto labels = pseudo_label_emotions(p, 0.7);
  ASSERT_TRUE(labels.has_value());
  EXPECT_EQ(*labels, (std::vector<int>{1, 0}));
  EXPECT_FALSE(pseudo_label_emotions(p, 0.85).has_value());
}

TEST(SelfTrainStateTest, ReplacementNotDuplication) {
  SelfTrainState s;
  s.add("target:a", {{{3}, {4}}, {2, 0}});
  s.add("target:a", {{{3}, {4}}, {0, 5}});
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.at("target:a").labels, (std::vector<int>{0, 5}));
}

struct Fixture {
  std::vector<Document> source, target;
  Vocabulary vocab;

  Fixture() {
    SyntheticSpec spec = default_synthetic_spec();
    spec.docs_per_domain = {30, 24};
    spec.min_clauses = 3;
    for (auto& d : generate_synthetic(spec)) (d.domain == "domain0" ? source : target).push_back(d);
    std::vector<Document> all = source;
    all.insert(all.end(), target.begin(), target.end());
    vocab = build_vocab(all, 1);
  }

  std::vector<EmotionAnnotated> gold_annotated() const {
    std::vector<EmotionAnnotated> out;
    for (const auto& d : target) out.push_back({&d, {{d.gold_pairs[0].emotion_clause, d.gold_pairs[0].category}}});
    return out;
  }

  PairModel pair_model() const {
    PairModelConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.hidden_dim = 16;
    cfg.latent_dim = 6;
    return PairModel(cfg, 5);
  }
};

TEST(EmotionSelfTrainTest, NothingClearsThresholdLeavesSetUnchanged) {
  const Fixture f;
  EmotionModel model({f.vocab.size(), 8, 8, 0.5}, 1);
  model.params().at("classifier.weight").setZero();
  model.params().at("classifier.bias").setZero();
  model.params().at("classifier.bias")(0, 0) = 10.0;
  EmotionSelfTrainConfig cfg;
  cfg.schedule = {0.0, 4};
  Adam opt;
  const auto res = emotion_self_train(model, opt, f.source, f.target, f.vocab, cfg);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_EQ(res.final_size, res.initial_size);
  EXPECT_TRUE(res.pseudo_labels.empty());
}

TEST(EmotionSelfTrainTest, EmptySourceIsConfigError) {
  const Fixture f;
  EmotionModel model({f.vocab.size(), 8, 8, 0.5}, 1);
  Adam opt;
  EXPECT_THROW(emotion_self_train(model, opt, {}, f.target, f.vocab, {}), ConfigError);
}

TEST(EmotionSelfTrainTest, SetNeverShrinksAndStopsWithinLimit) {
  const Fixture f;
  EmotionModel model({f.vocab.size(), 8, 8, 0.5}, 1);
  EmotionSelfTrainConfig cfg;
  cfg.schedule = {0.02, 4};
  cfg.max_iterations = 6;
  Adam opt;
  const auto res = emotion_self_train(model, opt, f.source, f.target, f.vocab, cfg);
  EXPECT_LE(res.iterations, 6);
  std::size_t prev = res.initial_size;
  for (auto s : res.sizes) {
    EXPECT_GE(s, prev);
    prev = s;
  }
  EXPECT_LE(res.final_size, f.source.size() + f.target.size());
}

TEST(CdSelfTrainTest, ZeroIterationsLeavesModelUnchanged) {
  const Fixture f;
  PairModel model = f.pair_model();
  const ParamStore before = model.params();
  Adam opt;
  CdSelfTrainConfig cfg;
  cfg.max_iterations = 0;
  cd_self_train(model, opt, f.gold_annotated(), f.vocab, cfg);
  EXPECT_EQ(model.params(), before);
}

TEST(CdSelfTrainTest, NoCandidatesIsAdaptationError) {
  const Fixture f;
  PairModel model = f.pair_model();
  Adam opt;
  std::vector<EmotionAnnotated> none;
  for (const auto& d : f.target) none.push_back({&d, {}});
  EXPECT_THROW(cd_self_train(model, opt, none, f.vocab, {}), AdaptationError);
}

TEST(CdSelfTrainTest, EqualSeedsGiveIdenticalParameters) {
  const Fixture f;
  const auto run = [&] {
    PairModel model = f.pair_model();
    Adam opt;
    CdSelfTrainConfig cfg;
    cfg.max_iterations = 3;
    cfg.schedule = {0.01, 16};
    cfg.seed = 99;
    cd_self_train(model, opt, f.gold_annotated(), f.vocab, cfg);
    return model.params();
  };
  EXPECT_EQ(run(), run());
}

TEST(CdSelfTrainTest, SetsAreRebuiltEachIterationAndLogged) {
  const Fixture f;
  ASSERT_GE(f.target.size(), 20u);
  PairModel model = f.pair_model();
  Adam opt;
  CdSelfTrainConfig cfg;
  cfg.max_iterations = 10;
  cfg.schedule = {0.01, 16};
  cfg.seed = 4;
  std::stringstream log;
  const auto res = cd_self_train(model, opt, f.gold_annotated(), f.vocab, cfg, &log, true);
  ASSERT_EQ(res.sets.size(), 10u);
  ASSERT_EQ(res.log.size(), 10u);
  bool negatives_differ = false;
  bool changed = false;
  for (std::size_t it = 0; it < res.sets.size(); ++it) {
    EXPECT_EQ(res.sets[it].positives.size(), f.target.size());
    EXPECT_EQ(res.sets[it].negatives.size(), f.target.size());
    if (it > 0) {
      for (std::size_t k = 0; k < res.sets[it].negatives.size(); ++k)
        negatives_differ = negatives_differ || !res.sets[it].negatives[k].same_pair(res.sets[0].negatives[k]);
      changed = changed || res.log[it].changed_fraction > 0.0;
    }
  }
  EXPECT_TRUE(negatives_differ);
  EXPECT_TRUE(changed);
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("iteration").get<int>(), lines);
    for (const char* key : {"positives", "negatives", "changed_positive_fraction", "changed_fraction"}) EXPECT_TRUE(j.contains(key));
    ++lines;
  }
  EXPECT_EQ(lines, 10);
}

TEST(CdSelfTrainTest, FixedNegativesAblationKeepsFirstNegatives) {
  const Fixture f;
  PairModel model = f.pair_model();
  Adam opt;
  CdSelfTrainConfig cfg;
  cfg.max_iterations = 5;
  cfg.schedule = {0.0, 16};  // frozen model: positives never move
  cfg.fresh_negatives = false;
  const auto res = cd_self_train(model, opt, f.gold_annotated(), f.vocab, cfg, nullptr, true);
  for (std::size_t it = 1; it < res.sets.size(); ++it)
    for (std::size_t k = 0; k < res.sets[it].negatives.size(); ++k)
      EXPECT_TRUE(res.sets[it].negatives[k].same_pair(res.sets[0].negatives[k]));
}

}  // namespace
}  // namespace carel

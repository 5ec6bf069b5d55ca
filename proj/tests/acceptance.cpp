// Acceptance driver: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Every tolerance is pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "carel/carel.hpp"
#include "test_oracles.hpp"

namespace {

using namespace carel;
using Clock = std::chrono::steady_clock;

// Criterion 1
constexpr int kBhPairs = 50;
constexpr double kBhRelTol = 1e-3;
constexpr int kKlGaussians = 20;
constexpr int kKlSamples = 1000000;
constexpr double kKlStdErrors = 3.0;
constexpr double kDivergenceSeconds = 30.0;
// Criterion 2
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 120.0;
// Criterion 3
constexpr int kSparsemaxVectors = 1000;
constexpr double kSimplexTol = 1e-9;
// Criterion 4
constexpr int kMmdPairs = 1000;
constexpr Index kHsicSamples = 500;
constexpr int kHsicPermutations = 200;
constexpr double kHsicQuantile = 0.95;
constexpr double kPermutationTol = 1e-12;  // row order only changes summation order
// Criterion 5
constexpr int kSeeds = 3;
constexpr double kMinTargetF1 = 0.85;
constexpr double kPipelineSeconds = 300.0;
// Criterion 6
constexpr double kMinSelfTrainingGain = 0.10;
// Criterion 7
constexpr int kFreshIterations = 10;
constexpr std::size_t kFreshMinDocs = 20;
constexpr std::size_t kFreshMinCandidates = 3;
// Criterion 8
constexpr double kMetricsTol = 1e-12;
constexpr double kCsvF1Tol = 5e-6;  // P, R, F1 are printed with 6 decimals

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int g_failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("CRITERION %d %s: %s (%s)\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  g_failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion_divergences() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(-3.0, 3.0), log_std(-1.5, 1.0);
  double worst_bh = 0.0;
  for (int k = 0; k < kBhPairs; ++k) {
    const double m1 = mean(rng), m2 = mean(rng), l1 = log_std(rng), l2 = log_std(rng);
    const double closed = bhattacharyya_diag({Vector::Constant(1, m1), Vector::Constant(1, l1)},
                                             {Vector::Constant(1, m2), Vector::Constant(1, l2)});
    const double numeric = oracle::bhattacharyya_integral(m1, std::exp(l1), m2, std::exp(l2));
    worst_bh = std::max(worst_bh, std::abs(closed - numeric) / std::max(std::abs(numeric), 1e-12));
  }
  double worst_z = 0.0;
  for (int k = 0; k < kKlGaussians; ++k) {
    Vector m(3), l(3);
    for (Index i = 0; i < 3; ++i) {
      m(i) = mean(rng) / 2.0;
      l(i) = log_std(rng) / 2.0;
    }
    const DiagonalGaussian q(m, l);
    const auto mc = oracle::kl_monte_carlo(q, kKlSamples, rng);
    worst_z = std::max(worst_z, std::abs(kl_to_standard_normal(q) - mc.mean) / mc.std_error);
  }
  const double secs = seconds_since(t0);
  report(1, worst_bh < kBhRelTol && worst_z <= kKlStdErrors && secs < kDivergenceSeconds, "divergence oracles",
         fmt("bhattacharyya max rel err %.2e < %.0e on %d pairs; KL max |z| %.2f <= %.0f on %d Gaussians x %d samples; %.1fs",
             worst_bh, kBhRelTol, kBhPairs, worst_z, kKlStdErrors, kKlGaussians, kKlSamples, secs));
}

void criterion_gradcheck() {
  const auto t0 = Clock::now();
  GradCheckConfig gc;
  bool pass = true;
  std::string detail;
  for (const auto& r : gradcheck_all(gc)) {
    pass = pass && r.max_rel_err < kGradRelTol && r.n_checked > 0;
    detail += fmt("%s %.1e; ", regularizer_name(r.regularizer).c_str(), r.max_rel_err);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < kGradSeconds;
  report(2, pass, "gradient check", detail + fmt("tol %.0e; %.1fs", kGradRelTol, secs));
}

void criterion_sparsemax() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(2, 16);
  std::normal_distribution<double> val(0.0, 2.0);
  double worst_simplex = 0.0, worst_oracle = 0.0;
  for (int k = 0; k < kSparsemaxVectors; ++k) {
    Vector v(len(rng));
    for (Index i = 0; i < v.size(); ++i) v(i) = val(rng);
    const Vector p = sparsemax(v);
    worst_simplex = std::max({worst_simplex, std::abs(p.sum() - 1.0), std::max(0.0, -p.minCoeff())});
    worst_oracle = std::max(worst_oracle, (p - oracle::simplex_projection_sort(v)).cwiseAbs().maxCoeff());
  }
  const Vector a = sparsemax((Vector(2) << 2.0, 1.0).finished());
  const Vector b = sparsemax((Vector(2) << 0.5, 0.4).finished());
  const double worked = std::max((a - (Vector(2) << 1.0, 0.0).finished()).cwiseAbs().maxCoeff(),
                                 (b - (Vector(2) << 0.55, 0.45).finished()).cwiseAbs().maxCoeff());
  report(3, worst_simplex <= kSimplexTol && worst_oracle <= kSimplexTol && worked <= kSimplexTol, "sparsemax",
         fmt("simplex violation %.1e, oracle diff %.1e, worked-value diff %.1e, tol %.0e over %d vectors", worst_simplex,
             worst_oracle, worked, kSimplexTol, kSparsemaxVectors));
}

void criterion_kernels() {
  std::mt19937_64 rng(11);
  const KernelSpec med = KernelSpec::median_heuristic();
  const SampleBatch x(oracle::random_matrix(16, 4, rng));
  const bool self_zero = mmd_biased_sq(x, x, med) == 0.0;

  double min_mmd = 0.0;
  double worst_perm = 0.0;
  std::uniform_int_distribution<int> size(2, 20);
  for (int k = 0; k < kMmdPairs; ++k) {
    const Index d = 1 + k % 5;
    const Matrix a = oracle::random_matrix(size(rng), d, rng);
    const Matrix b = oracle::random_matrix(size(rng), d, rng, 1.5).array() + 0.3;
    const KernelSpec kernel = k % 2 ? med : KernelSpec::rbf(0.5 + (k % 7) * 0.3);
    const double v = mmd_biased_sq(SampleBatch(a), SampleBatch(b), kernel);
    min_mmd = std::min(min_mmd, v);
    std::vector<Index> pa(static_cast<std::size_t>(a.rows())), pb(static_cast<std::size_t>(b.rows()));
    std::iota(pa.begin(), pa.end(), 0);
    std::iota(pb.begin(), pb.end(), 0);
    std::shuffle(pa.begin(), pa.end(), rng);
    std::shuffle(pb.begin(), pb.end(), rng);
    Matrix ap(a.rows(), d), bp(b.rows(), d);
    for (Index i = 0; i < a.rows(); ++i) ap.row(i) = a.row(pa[static_cast<std::size_t>(i)]);
    for (Index i = 0; i < b.rows(); ++i) bp.row(i) = b.row(pb[static_cast<std::size_t>(i)]);
    worst_perm = std::max(worst_perm, std::abs(mmd_biased_sq(SampleBatch(ap), SampleBatch(bp), kernel) - v));
  }

  const double hsic_const =
      hsic_biased(SampleBatch(Matrix::Constant(32, 3, 0.7)), SampleBatch(oracle::random_matrix(32, 3, rng)), KernelSpec::rbf(1.0));
  const Matrix hx = oracle::random_matrix(kHsicSamples, 2, rng);
  const Matrix hy = oracle::random_matrix(kHsicSamples, 2, rng);
  const double stat = hsic_biased(SampleBatch(hx), SampleBatch(hy), med);
  std::vector<double> null;
  std::vector<Index> perm(static_cast<std::size_t>(kHsicSamples));
  std::iota(perm.begin(), perm.end(), 0);
  for (int p = 0; p < kHsicPermutations; ++p) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix yp(kHsicSamples, 2);
    for (Index i = 0; i < kHsicSamples; ++i) yp.row(i) = hy.row(perm[static_cast<std::size_t>(i)]);
    null.push_back(hsic_biased(SampleBatch(hx), SampleBatch(yp), med));
  }
  std::sort(null.begin(), null.end());
  const double q95 = null[static_cast<std::size_t>(std::ceil(kHsicQuantile * kHsicPermutations)) - 1];
  const bool pass = self_zero && min_mmd >= 0.0 && worst_perm <= kPermutationTol && hsic_const == 0.0 && stat < q95;
  report(4, pass, "MMD/HSIC properties",
         fmt("mmd(x,x)=0 %s; min mmd %.2e over %d pairs; permutation diff %.1e; hsic(const)=%.1e; hsic %.3e < null q95 %.3e",
             self_zero ? "yes" : "no", min_mmd, kMmdPairs, worst_perm, hsic_const, stat, q95));
}

// ---------------------------------------------------------------------------

struct SeedRun {
  double seconds = 0.0;  // source training + adaptation + evaluation, mmd
  double adapted = 0.0;
  double unadapted = 0.0;
  double none_adapted = 0.0;
  double gold_adapted = 0.0;
  std::string csv;
};

void split(const std::vector<Document>& docs, std::vector<Document>& source, std::vector<Document>& target) {
  for (const auto& d : docs) (d.domain == docs.front().domain ? source : target).push_back(d);
}

std::string csv_of(const std::vector<MetricsReport>& rows) {
  std::ostringstream out;
  write_report_csv(rows, out);
  return out.str();
}

double ecpe_all(const std::vector<MetricsReport>& rows) {
  for (const auto& r : rows)
    if (r.task == Task::ecpe && r.case_label == "all") return r.f1;
  return 0.0;
}

struct FullRun {
  std::string csv;
  Bundle bundle;
};

FullRun full_pipeline(RunConfig cfg, const std::vector<Document>& source, const std::vector<Document>& target) {
  FullRun run{{}, train_source(cfg, source, target)};
  adapt(run.bundle, source, target);
  run.csv = csv_of(evaluate(run.bundle, target));
  return run;
}

RunConfig seeded(const RunConfig& base, int s) {
  RunConfig cfg = base;
  cfg.seed = 1000 + static_cast<std::uint64_t>(s);
  return cfg;
}

std::vector<Document> seeded_corpus(int s) {
  SyntheticSpec spec = default_synthetic_spec();
  spec.seed = 100 + static_cast<std::uint64_t>(s);
  return generate_synthetic(spec);
}

std::vector<SeedRun> run_experiments(const RunConfig& base, std::vector<std::string>& all_csv) {
  std::vector<SeedRun> runs;
  for (int s = 0; s < kSeeds; ++s) {
    std::vector<Document> source, target;
    split(seeded_corpus(s), source, target);
    SeedRun r;
    const auto t0 = Clock::now();
    const RunConfig cfg = seeded(base, s);
    const Bundle trained = train_source(cfg, source, target);
    const auto unadapted_rows = evaluate(trained, target);
    Bundle adapted = trained;
    adapt(adapted, source, target);
    const auto rows = evaluate(adapted, target);
    r.seconds = seconds_since(t0);
    r.unadapted = ecpe_all(unadapted_rows);
    r.adapted = ecpe_all(rows);
    r.csv = csv_of(rows);
    all_csv.push_back(csv_of(unadapted_rows));
    all_csv.push_back(r.csv);

    Bundle gold = trained;
    gold.config.use_gold_emotions = true;
    adapt(gold, source, target);
    const auto gold_rows = evaluate(gold, target);
    r.gold_adapted = ecpe_all(gold_rows);
    all_csv.push_back(csv_of(gold_rows));

    RunConfig none_cfg = cfg;
    none_cfg.regularizer = Regularizer::none;
    const FullRun none = full_pipeline(none_cfg, source, target);
    r.none_adapted = ecpe_all(evaluate(none.bundle, target));
    all_csv.push_back(none.csv);

    std::printf("  seed %d: unadapted %.4f  adapted %.4f  none %.4f  gold-emotions %.4f  (%.1fs)\n", s, r.unadapted,
                r.adapted, r.none_adapted, r.gold_adapted, r.seconds);
    std::fflush(stdout);
    runs.push_back(r);
  }
  return runs;
}

void criterion_end_to_end(const std::vector<SeedRun>& runs) {
  std::vector<double> f1;
  double secs = 0.0;
  for (const auto& r : runs) {
    f1.push_back(r.adapted);
    secs = std::max(secs, r.seconds);
  }
  const double med = median(f1);
  report(5, med >= kMinTargetF1 && secs < kPipelineSeconds, "end-to-end synthetic adaptation",
         fmt("median target ECPE F1 %.4f >= %.2f over %d seeds [%.4f %.4f %.4f]; slowest pipeline %.1fs < %.0fs", med,
             kMinTargetF1, kSeeds, f1[0], f1[1], f1[2], secs, kPipelineSeconds));
}

void criterion_ablations(const std::vector<SeedRun>& runs) {
  std::vector<double> gain, margin;
  bool gold_ok = true;
  for (const auto& r : runs) {
    gain.push_back(r.adapted - r.unadapted);
    margin.push_back(r.adapted - r.none_adapted);
    gold_ok = gold_ok && r.gold_adapted >= r.adapted;
  }
  const double g = median(gain), m = median(margin);
  report(6, g >= kMinSelfTrainingGain && m > 0.0 && gold_ok, "ablation directions",
         fmt("(a) median self-training gain %.4f >= %.2f; (b) median mmd-vs-none margin %+.4f > 0; (c) gold emotions >= "
             "predicted on every seed: %s",
             g, kMinSelfTrainingGain, m, gold_ok ? "yes" : "no"));
}

void criterion_fresh_sets() {
  SyntheticSpec spec = default_synthetic_spec();
  spec.docs_per_domain = {10, 30};
  const auto docs = generate_synthetic(spec);
  std::vector<Document> source, target;
  split(docs, source, target);
  const Vocabulary vocab = build_vocab(docs, 1);
  std::vector<EmotionAnnotated> annotated;
  bool enough_candidates = target.size() >= kFreshMinDocs;
  for (const auto& d : target) {
    EmotionAnnotated a{&d, {}};
    for (const auto& gp : d.gold_pairs) a.emotions.push_back({gp.emotion_clause, gp.category});
    enough_candidates = enough_candidates && d.clauses.size() * a.emotions.size() >= kFreshMinCandidates;
    annotated.push_back(a);
  }
  PairModelConfig pc;
  pc.vocab_size = vocab.size();
  pc.latent_dim = 6;
  pc.hidden_dim = 16;
  PairModel model(pc, 5);
  Adam opt;
  CdSelfTrainConfig cfg;
  cfg.max_iterations = kFreshIterations;
  cfg.schedule = {0.01, 16};
  cfg.seed = 4;
  std::ostringstream log;
  const auto res = cd_self_train(model, opt, annotated, vocab, cfg, &log, true);
  bool differ = false;
  double max_changed = 0.0;
  for (std::size_t it = 1; it < res.sets.size(); ++it) {
    for (std::size_t k = 0; k < res.sets[it].negatives.size(); ++k)
      differ = differ || !res.sets[it].negatives[k].same_pair(res.sets[0].negatives[k]);
    max_changed = std::max(max_changed, res.log[it].changed_fraction);
  }
  const std::string log_text = log.str();
  const auto lines = static_cast<std::size_t>(std::count(log_text.begin(), log_text.end(), '\n'));
  report(7, enough_candidates && differ && max_changed > 0.0 && lines == static_cast<std::size_t>(kFreshIterations),
         "fresh pseudo-label sets",
         fmt("%zu docs; negatives differ across iterations: %s; max changed fraction after iteration 0: %.3f; %zu log lines",
             target.size(), differ ? "yes" : "no", max_changed, lines));
}

void criterion_metrics(const std::vector<std::string>& csvs) {
  const std::vector<PairTuple> gold = {
      {"a", 2, 1, Emotion::anger}, {"b", 3, 0, Emotion::fear}, {"c", 1, 1, Emotion::sadness}};
  const std::vector<PairTuple> pred = {
      {"a", 2, 1, Emotion::anger}, {"b", 3, 0, Emotion::fear}, {"b", 3, 2, Emotion::fear}, {"c", 1, 0, Emotion::sadness}};
  const MetricsReport e = score_ecpe(pred, gold).all;
  const bool fixture = std::abs(e.precision - 0.5) < kMetricsTol && std::abs(e.recall - 2.0 / 3.0) < kMetricsTol &&
                       std::abs(e.f1 - 4.0 / 7.0) < kMetricsTol;
  MetricsReport a, b;
  a.f1 = 0.8;
  a.n_gold = 30;
  b.f1 = 0.6;
  b.n_gold = 10;
  const double wa = weighted_average({a, b}).f1;
  std::size_t rows = 0;
  double worst = 0.0;
  for (const auto& csv : csvs) {
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("task,", 0) == 0) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      const double p = std::stod(f[3]), r = std::stod(f[4]), f1 = std::stod(f[5]);
      worst = std::max(worst, std::abs(f1 - f1_score(p, r)));
      ++rows;
    }
  }
  report(8, fixture && std::abs(wa - 0.75) < kMetricsTol && rows > 0 && worst <= kCsvF1Tol, "metrics arithmetic",
         fmt("P=%.6f R=%.6f F1=%.6f; weighted average %.6f; F1 identity max diff %.1e <= %.0e on %zu emitted rows",
             e.precision, e.recall, e.f1, wa, worst, kCsvF1Tol, rows));
}

void criterion_determinism(const RunConfig& base, const SeedRun& first) {
  std::vector<Document> source, target;
  split(seeded_corpus(0), source, target);
  const RunConfig cfg = seeded(base, 0);
  const FullRun a = full_pipeline(cfg, source, target);
  const FullRun b = full_pipeline(cfg, source, target);
  const bool same_csv = a.csv == b.csv && a.csv == first.csv;
  const bool same_params = a.bundle.pair.params() == b.bundle.pair.params() &&
                           a.bundle.emotion.params() == b.bundle.emotion.params() &&
                           to_json(a.bundle).dump() == to_json(b.bundle).dump();
  report(9, same_csv && same_params, "determinism",
         fmt("CSV byte-identical: %s; checkpoint parameters identical: %s", same_csv ? "yes" : "no",
             same_params ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string config_path = argc > 1 ? argv[1] : std::string(CAREL_SOURCE_DIR) + "/configs/desk.json";
  try {
    criterion_divergences();
    criterion_gradcheck();
    criterion_sparsemax();
    criterion_kernels();
    const RunConfig base = load_run_config(config_path);
    std::vector<std::string> csvs;
    const auto runs = run_experiments(base, csvs);
    criterion_end_to_end(runs);
    criterion_ablations(runs);
    criterion_fresh_sets();
    criterion_metrics(csvs);
    criterion_determinism(base, runs.front());
  } catch (const std::exception& e) {
    std::printf("FAIL: unexpected error: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}

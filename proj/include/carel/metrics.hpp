#pragma once

#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "carel/corpus.hpp"

namespace carel {

enum class Task { ee, ecpe };

inline std::string task_name(Task t) { return t == Task::ee ? "EE" : "ECPE"; }

struct MetricsReport {
  Task task = Task::ecpe;
  std::string source;
  std::string target;
  std::string case_label = "all";  // all | normal | self-chain
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
  std::size_t n_correct = 0;

  bool operator==(const MetricsReport&) const = default;
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline MetricsReport report_from_counts(Task task, std::size_t n_pred, std::size_t n_gold, std::size_t n_correct) {
  MetricsReport r;
  r.task = task;
  r.n_pred = n_pred;
  r.n_gold = n_gold;
  r.n_correct = n_correct;
  r.precision = n_pred > 0 ? static_cast<double>(n_correct) / static_cast<double>(n_pred) : 0.0;
  r.recall = n_gold > 0 ? static_cast<double>(n_correct) / static_cast<double>(n_gold) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

/// (doc, emotion clause, cause clause, category)
struct PairTuple {
  std::string doc_id;
  int emotion_clause = 0;
  int cause_clause = 0;
  Emotion category = Emotion::happiness;

  bool self_chain() const { return emotion_clause == cause_clause; }
  auto operator<=>(const PairTuple&) const = default;
};

struct EcpeScores {
  MetricsReport all;
  MetricsReport normal;
  MetricsReport self_chain;
};

/// Exact-match scoring; each gold tuple is credited at most once.
inline EcpeScores score_ecpe(const std::vector<PairTuple>& predicted, const std::vector<PairTuple>& gold) {
  const auto score = [&](auto keep) {
    std::multiset<PairTuple> remaining;
    std::size_t n_gold = 0;
    for (const auto& g : gold)
      if (keep(g)) {
        remaining.insert(g);
        ++n_gold;
      }
    std::size_t n_pred = 0;
    std::size_t n_correct = 0;
    for (const auto& p : predicted) {
      if (!keep(p)) continue;
      ++n_pred;
      auto it = remaining.find(p);
      if (it != remaining.end()) {
        ++n_correct;
        remaining.erase(it);
      }
    }
    return report_from_counts(Task::ecpe, n_pred, n_gold, n_correct);
  };
  EcpeScores s;
  s.all = score([](const PairTuple&) { return true; });
  s.normal = score([](const PairTuple& t) { return !t.self_chain(); });
  s.self_chain = score([](const PairTuple& t) { return t.self_chain(); });
  s.normal.case_label = "normal";
  s.self_chain.case_label = "self-chain";
  return s;
}

/// Per-clause scoring: correct iff predicted == gold != None.
inline MetricsReport score_ee(const std::vector<std::vector<Emotion>>& predicted, const std::vector<std::vector<Emotion>>& gold) {
  if (predicted.size() != gold.size()) throw DomainError("score_ee: document count mismatch");
  std::size_t n_pred = 0, n_gold = 0, n_correct = 0;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    if (predicted[d].size() != gold[d].size()) throw DomainError("score_ee: clause count mismatch");
    for (std::size_t i = 0; i < gold[d].size(); ++i) {
      const bool p = predicted[d][i] != Emotion::none;
      const bool g = gold[d][i] != Emotion::none;
      n_pred += p;
      n_gold += g;
      n_correct += (p && g && predicted[d][i] == gold[d][i]);
    }
  }
  return report_from_counts(Task::ee, n_pred, n_gold, n_correct);
}

/// P, R and F1 averaged with weights proportional to each report's gold count.
inline MetricsReport weighted_average(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DomainError("weighted_average: no reports");
  double total_gold = 0.0;
  for (const auto& r : reports) total_gold += static_cast<double>(r.n_gold);
  if (total_gold <= 0.0) throw DomainError("weighted_average: zero total gold count");
  MetricsReport out = reports.front();
  out.precision = out.recall = out.f1 = 0.0;
  out.n_pred = out.n_gold = out.n_correct = 0;
  out.target = reports.size() == 1 ? reports.front().target : "weighted-average";
  for (const auto& r : reports) {
    const double w = static_cast<double>(r.n_gold) / total_gold;
    out.precision += w * r.precision;
    out.recall += w * r.recall;
    out.f1 += w * r.f1;
    out.n_pred += r.n_pred;
    out.n_gold += r.n_gold;
    out.n_correct += r.n_correct;
  }
  return out;
}

inline constexpr const char* kReportHeaderComment =
    "# weighted-average rows weight each target domain by its gold count "
    "(gold pairs for ECPE, gold emotion clauses for EE)";
inline constexpr const char* kReportColumns = "task,source,target,precision,recall,f1,n_pred,n_gold,n_correct,case";

inline void write_report_csv(const std::vector<MetricsReport>& rows, std::ostream& out) {
  out << kReportHeaderComment << '\n' << kReportColumns << '\n';
  char buf[64];
  for (const auto& r : rows) {
    out << task_name(r.task) << ',' << r.source << ',' << r.target;
    for (double v : {r.precision, r.recall, r.f1}) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      out << buf;
    }
    out << ',' << r.n_pred << ',' << r.n_gold << ',' << r.n_correct << ',' << r.case_label << '\n';
  }
}

}  // namespace carel

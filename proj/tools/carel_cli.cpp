// Command-line front end: corpus generation, source training, adaptation,
// evaluation, gradient checking and embedding export.
//
// Failures print one JSON line {"error": kind, "message": ...} to stderr.
// Exit codes: 2 usage, 3 config, 4 parse/IO, 5 training, 6 adaptation,
// 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "carel/carel.hpp"

namespace {

using namespace carel;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master random seed (overrides the config)");
  cmd->add_option("--config", c.config, "JSON config file");
}

RunConfig resolve_config(const Common& c, const RunConfig& fallback = {}) {
  RunConfig cfg = c.config.empty() ? fallback : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

int run_gen_corpus(const Common& common, const std::string& spec_path, const std::string& out_dir) {
  SyntheticSpec spec = spec_path.empty() ? default_synthetic_spec() : synthetic_spec_from_json(read_json_file(spec_path));
  if (common.seed) spec.seed = *common.seed;
  const auto docs = generate_synthetic(spec);
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::vector<Document>> by_domain;
  for (const auto& d : docs) by_domain[d.domain].push_back(d);
  for (const auto& [domain, group] : by_domain) {
    const std::string path = (std::filesystem::path(out_dir) / (domain + ".jsonl")).string();
    write_corpus(group, path);
    std::cout << domain << ": " << group.size() << " documents -> " << path << '\n';
  }
  return 0;
}

int run_train_source(const Common& common, const std::string& corpus, const std::string& unlabeled, const std::string& out) {
  const RunConfig cfg = resolve_config(common);
  const auto source = parse_corpus(corpus);
  const auto extra = unlabeled.empty() ? std::vector<Document>{} : parse_corpus(unlabeled);
  const Bundle b = train_source(cfg, source, extra);
  save_bundle(b, out);
  std::cout << "trained on " << source.size() << " " << b.source_domain << " documents; vocabulary " << b.vocab.size()
            << " -> " << out << '\n';
  return 0;
}

int run_adapt(const Common& common, const std::string& in, const std::string& source_path, const std::string& target_path,
              const std::string& out, const std::string& log_path) {
  Bundle b = load_bundle(in);
  const RunConfig cfg = resolve_config(common, b.config);
  if (cfg.d != b.config.d || cfg.d_h != b.config.d_h || cfg.d_b != b.config.d_b || cfg.d_l != b.config.d_l ||
      cfg.adapter != b.config.adapter || cfg.encoder != b.config.encoder)
    throw ConfigError("adapt: config architecture differs from the checkpoint");
  b.config = cfg;
  const auto source = parse_corpus(source_path);
  const auto target = parse_corpus(target_path);
  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw ParseError("cannot write log: " + log_path);
  }
  const AdaptReport rep = adapt(b, source, target, log_path.empty() ? nullptr : &log_file);
  save_bundle(b, out);
  std::cout << "emotion self-training: " << rep.emotion.iterations << " iterations, |S| " << rep.emotion.initial_size << " -> "
            << rep.emotion.final_size << "; CD-SelfTrain: " << rep.cd.log.size() << " iterations -> " << out << '\n';
  return 0;
}

int run_evaluate(const Common& common, const std::string& ckpt, const std::string& corpus, const std::string& report) {
  Bundle b = load_bundle(ckpt);
  if (!common.config.empty()) b.config = resolve_config(common, b.config);
  const auto rows = evaluate(b, parse_corpus(corpus));
  if (report.empty()) {
    write_report_csv(rows, std::cout);
  } else {
    write_report_csv(rows, report);
    for (const auto& r : rows)
      std::printf("%s %s->%s %-10s P=%.4f R=%.4f F1=%.4f\n", task_name(r.task).c_str(), r.source.c_str(), r.target.c_str(),
                  r.case_label.c_str(), r.precision, r.recall, r.f1);
  }
  return 0;
}

int run_gradcheck(const Common& common, const std::string& adapter) {
  GradCheckConfig gc;
  if (!common.config.empty()) {
    const auto j = read_json_file(common.config);
    for (const auto& [k, _] : j.items())
      if (k != "vocab_size" && k != "d" && k != "d_h" && k != "batch_size" && k != "step" && k != "adapter")
        throw ConfigError("unknown gradcheck config key: " + k);
    gc.vocab_size = j.value("vocab_size", gc.vocab_size);
    gc.latent_dim = j.value("d", gc.latent_dim);
    gc.hidden_dim = j.value("d_h", gc.hidden_dim);
    gc.batch_size = j.value("batch_size", gc.batch_size);
    gc.step = j.value("step", gc.step);
    if (j.contains("adapter")) gc.adapter = adapter_mode_from_name(j["adapter"].get<std::string>());
  }
  if (!adapter.empty()) gc.adapter = adapter_mode_from_name(adapter);
  if (common.seed) gc.seed = *common.seed;
  double worst = 0.0;
  for (const auto& r : gradcheck_all(gc)) {
    std::printf("regularizer=%s params=%zu max_rel_err=%.3e worst=%s\n", regularizer_name(r.regularizer).c_str(), r.n_checked,
                r.max_rel_err, r.worst_param.c_str());
    worst = std::max(worst, r.max_rel_err);
  }
  std::printf("max_rel_err=%.3e\n", worst);
  return worst < 1e-4 ? 0 : 1;
}

int run_export(const std::string& ckpt, const std::string& corpus, const std::string& out) {
  const Bundle b = load_bundle(ckpt);
  export_embeddings(b.pair, b.vocab, parse_corpus(corpus), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain emotion-cause pair extraction toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string spec_path, out_dir = "corpus";
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic multi-domain corpus");
  add_common(gen, common);
  gen->add_option("--spec", spec_path, "Synthetic spec JSON (default spec when omitted)");
  gen->add_option("--out", out_dir, "Output directory; one <domain>.jsonl per domain");

  std::string corpus, unlabeled, ckpt_out;
  auto* train = app.add_subcommand("train-source", "Train both models on a labeled source corpus");
  add_common(train, common);
  train->add_option("--corpus", corpus, "Labeled source corpus (JSON lines)")->required();
  train->add_option("--unlabeled", unlabeled, "Unlabeled target corpus used only for the vocabulary");
  train->add_option("--checkpoint-out", ckpt_out, "Output checkpoint")->required();

  std::string ckpt_in, source_path, target_path, log_path;
  auto* adapt_cmd = app.add_subcommand("adapt", "Self-train a source checkpoint on an unlabeled target corpus");
  add_common(adapt_cmd, common);
  adapt_cmd->add_option("--checkpoint-in", ckpt_in, "Source-trained checkpoint")->required();
  adapt_cmd->add_option("--source", source_path, "Labeled source corpus")->required();
  adapt_cmd->add_option("--target", target_path, "Target corpus (labels ignored)")->required();
  adapt_cmd->add_option("--checkpoint-out", ckpt_out, "Output checkpoint")->required();
  adapt_cmd->add_option("--log", log_path, "CD-SelfTrain iteration log (JSON lines)");

  std::string report;
  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on a labeled corpus");
  add_common(eval, common);
  eval->add_option("--checkpoint", ckpt_in, "Checkpoint")->required();
  eval->add_option("--corpus", corpus, "Labeled corpus")->required();
  eval->add_option("--report-out", report, "CSV report path (stdout when omitted)");

  std::string adapter;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the training-loss gradient");
  add_common(grad, common);
  grad->add_option("--adapter", adapter, "pooled | per-token");

  std::string emb_out;
  auto* exp = app.add_subcommand("export-embeddings", "Write posterior means for every gold pair");
  add_common(exp, common);
  exp->add_option("--checkpoint", ckpt_in, "Checkpoint")->required();
  exp->add_option("--corpus", corpus, "Corpus")->required();
  exp->add_option("--out", emb_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*gen) return run_gen_corpus(common, spec_path, out_dir);
    if (*train) return run_train_source(common, corpus, unlabeled, ckpt_out);
    if (*adapt_cmd) return run_adapt(common, ckpt_in, source_path, target_path, ckpt_out, log_path);
    if (*eval) return run_evaluate(common, ckpt_in, corpus, report);
    if (*grad) return run_gradcheck(common, adapter);
    if (*exp) return run_export(ckpt_in, corpus, emb_out);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 3);
  } catch (const ParseError& e) {
    return fail("parse", e.what(), 4);
  } catch (const TrainingError& e) {
    return fail("training:" + e.component(), e.what(), 5);
  } catch (const AdaptationError& e) {
    return fail("adaptation", e.what(), 6);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return fail("usage", "no command", 2);
}

// mixreg: train, evaluate, sweep, verify and decompose Mixup objectives.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixreg/beta_moments.hpp"
#include "mixreg/experiment.hpp"
#include "mixreg/fault.hpp"
#include "mixreg/verify.hpp"

namespace fs = std::filesystem;
using namespace mixreg;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  std::string method;
  std::string mode;
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_method, bool with_mode) {
  cmd->add_option("--config", f.config, "JSON experiment spec; flags override its values")->check(CLI::ExistingFile);
  f.seed_opt = cmd->add_option("--seed", f.seed, "Base seed");
  f.alpha_opt = cmd->add_option("--alpha", f.alpha, "Beta(alpha, alpha) parameter")->check(CLI::PositiveNumber);
  if (with_method) {
    cmd->add_option("--method", f.method, "erm | mixup | erm_modified | mixup_approx")
        ->check(CLI::IsMember({"erm", "mixup", "erm_modified", "mixup_approx"}));
  }
  if (with_mode) cmd->add_option("--mode", f.mode, "raw | rescaled")->check(CLI::IsMember({"raw", "rescaled"}));
  f.out_opt = cmd->add_option("--out", f.out, "Output location");
}

ExperimentSpec resolve(const CommonFlags& f) {
  ExperimentSpec spec = f.config.empty() ? ExperimentSpec{} : load_spec(f.config);
  if (f.seed_opt && f.seed_opt->count()) spec.seed = f.seed;
  if (f.alpha_opt && f.alpha_opt->count()) {
    spec.train.alpha = f.alpha;
    spec.alphas = {f.alpha};
  }
  if (!f.method.empty()) {
    spec.train.method = parse_method(f.method);
    spec.methods = {spec.train.method};
  }
  if (!f.mode.empty()) spec.modes = {parse_prediction_mode(f.mode)};
  if (f.out_opt && f.out_opt->count()) spec.out_dir = f.out;
  validate(spec);
  return spec;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void print_metrics(const RunRecord& rec) {
  std::printf("%-14s %-9s %9s %9s %9s %9s %9s\n", "method", "mode", "accuracy", "ce_loss", "ece", "entropy", "conf");
  for (const auto& [mode, m] : rec.metrics) {
    std::printf("%-14s %-9s %9.4f %9.4f %9.4f %9.4f %9.4f\n", std::string(to_string(rec.method)).c_str(),
                std::string(to_string(mode)).c_str(), m.accuracy, m.ce_loss, m.ece, m.mean_entropy, m.mean_confidence);
  }
}

int cmd_train(const CommonFlags& f) {
  const ExperimentSpec spec = resolve(f);
  const fs::path dir = spec.out_dir;
  fs::create_directories(dir);
  const RunRecord rec = run_once(spec, spec.train.method, spec.train.alpha, spec.seed);
  write_json({{"model", model_to_json(rec.result.model)},
              {"rescale", rescale_to_json(rec.result.rescale)},
              {"loss", std::string(to_string(spec.train.loss))},
              {"method", std::string(to_string(rec.method))},
              {"alpha", rec.alpha},
              {"seed", rec.seed}},
             dir / "model.json");
  save_trace_csv(rec.result.trace, dir / "trace.csv");
  write_json(spec_to_json(spec), dir / "spec.json");
  print_metrics(rec);
  std::printf("wrote %s\n", (dir / "model.json").c_str());
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& model_path) {
  const ExperimentSpec spec = resolve(f);
  const json artifact = read_json(model_path);
  const Model model = model_from_json(artifact.at("model"));
  const RescaleStats stats = rescale_from_json(artifact.at("rescale"));
  const LossKind loss = parse_loss_kind(artifact.at("loss").get<std::string>());
  const DataSplit data = build_data(spec.data, loss, spec.seed);
  RunRecord rec;
  rec.method = parse_method(artifact.at("method").get<std::string>());
  rec.alpha = artifact.at("alpha").get<double>();
  rec.seed = spec.seed;
  for (const PredictionMode mode : spec.modes) rec.metrics.emplace_back(mode, metrics(model, data.test, mode, stats));
  const fs::path dir = spec.out_dir;
  write_metrics_csv(std::span<const RunRecord>(&rec, 1), dir / "metrics.csv");
  for (const auto& [mode, m] : rec.metrics) {
    write_histogram_csv(m, dir / ("histogram_" + std::string(to_string(mode)) + ".csv"));
  }
  write_json(spec_to_json(spec), dir / "spec.json");
  print_metrics(rec);
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::vector<double>& alphas, const std::vector<std::uint64_t>& seeds,
              int repetitions) {
  ExperimentSpec spec = resolve(f);
  if (!alphas.empty()) spec.alphas = alphas;
  if (repetitions > 0) spec.repetitions = repetitions;
  validate(spec);
  const std::vector<std::uint64_t> run_seeds = seeds.empty() ? spec.seeds() : seeds;
  const std::vector<RunRecord> runs = run_sweep(spec, run_seeds);
  const fs::path dir = spec.out_dir;
  write_runs_csv(runs, dir / "runs.csv");
  write_summary_csv(runs, dir / "summary.csv");
  json echoed = spec_to_json(spec);
  echoed["seeds_used"] = run_seeds;
  write_json(echoed, dir / "spec.json");
  std::printf("%zu runs; wrote %s and %s\n", runs.size(), (dir / "runs.csv").c_str(), (dir / "summary.csv").c_str());
  return 0;
}

int cmd_verify(const CommonFlags& f, const std::string& fault_name, bool quick) {
  std::optional<fault::ScopedMutation> mutation;
  if (!fault_name.empty()) {
    const auto m = fault::parse(fault_name);
    if (!m) throw std::invalid_argument("unknown fault '" + fault_name + "'");
    mutation.emplace(*m);
  }
  verify::RunOptions options;
  if (quick) options = verify::RunOptions{20000, 100000, 100000, 200};
  const std::uint64_t seed = f.seed_opt->count() ? f.seed : 0;
  const auto reports = verify::run_all(seed, options);
  bool all = true;
  std::printf("%-24s %-6s %12s %12s %9s  %s\n", "check", "status", "discrepancy", "tolerance", "seconds", "note");
  for (const auto& r : reports) {
    all = all && r.passed;
    std::printf("%-24s %-6s %12.4g %12.4g %9.2f  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.discrepancy,
                r.tolerance, r.runtime_seconds, r.note.c_str());
  }
  json report = verify::to_json(reports, seed);
  report["fault"] = fault_name.empty() ? "none" : fault_name;
  if (f.out_opt->count()) write_json(report, f.out);
  std::printf("%s: %zu checks\n", all ? "ALL PASS" : "FAILURES", reports.size());
  return all ? 0 : 1;
}

int cmd_breakdown(const CommonFlags& f, const std::string& model_path) {
  const ExperimentSpec spec = resolve(f);
  Model model;
  LossKind loss = spec.train.loss;
  if (model_path.empty()) {
    model = run_once(spec, spec.train.method, spec.train.alpha, spec.seed).result.model;
  } else {
    const json artifact = read_json(model_path);
    model = model_from_json(artifact.at("model"));
    loss = parse_loss_kind(artifact.at("loss").get<std::string>());
  }
  const DataSplit data = build_data(spec.data, loss, spec.seed);
  const RegularizerBreakdown b = r_terms_general(data.train, model, loss, coefficients(spec.train.alpha));
  const fs::path out = f.out_opt->count() ? fs::path(f.out) : fs::path(spec.out_dir) / "breakdown.csv";
  write_breakdown_csv(std::span<const RegularizerBreakdown>(&b, 1), out);
  std::printf("erm_modified %.6g  r1 %.6g  r2 %.6g  r3 %.6g  r4 %.6g  total %.6g\n", b.erm_modified, b.r1, b.r2, b.r3,
              b.r4, b.total);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixup as regularised ERM: training, evaluation and verification"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, sweep_f, verify_f, breakdown_f;
  auto* train_cmd = app.add_subcommand("train", "Train one model; writes model.json, trace.csv and spec.json");
  add_common(train_cmd, train_f, true, true);

  std::string eval_model;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on the spec's test split");
  add_common(eval_cmd, eval_f, false, true);
  eval_cmd->add_option("--model", eval_model, "model.json written by train")->required()->check(CLI::ExistingFile);

  std::vector<double> sweep_alphas;
  std::vector<std::uint64_t> sweep_seeds;
  int sweep_reps = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every (alpha, method, seed) cell; writes runs.csv and summary.csv");
  add_common(sweep_cmd, sweep_f, true, true);
  sweep_cmd->add_option("--alphas", sweep_alphas, "Alpha grid (overrides --alpha)");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Explicit seed list (overrides repetitions)");
  sweep_cmd->add_option("--repetitions", sweep_reps, "Number of seeds starting at --seed")->check(CLI::PositiveNumber);

  std::string fault_name;
  bool quick = false;
  auto* verify_cmd = app.add_subcommand("verify", "Run the numerical verification suite; exit 0 iff all checks pass");
  add_common(verify_cmd, verify_f, false, false);
  verify_cmd->add_option("--inject-fault", fault_name,
                         "Run with a formula mutation: shift_theta_bar | drop_gamma_sq | drop_sigma_sq | flip_r3_sign");
  verify_cmd->add_flag("--quick", quick, "Fewer Monte-Carlo draws and 200 random features");

  std::string breakdown_model;
  auto* breakdown_cmd = app.add_subcommand("breakdown", "Regularizer terms on the training split; writes a CSV row");
  add_common(breakdown_cmd, breakdown_f, true, false);
  breakdown_cmd->add_option("--model", breakdown_model, "model.json; trains per spec when omitted")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_f);
    if (*eval_cmd) return cmd_eval(eval_f, eval_model);
    if (*sweep_cmd) return cmd_sweep(sweep_f, sweep_alphas, sweep_seeds, sweep_reps);
    if (*verify_cmd) return cmd_verify(verify_f, fault_name, quick);
    if (*breakdown_cmd) return cmd_breakdown(breakdown_f, breakdown_model);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixreg/dataset.hpp"
#include "mixreg/evaluate.hpp"
#include "mixreg/model.hpp"
#include "mixreg/regularization.hpp"
#include "mixreg/trainer.hpp"

namespace mixreg {

struct DatasetSpec {
  std::string kind = "two_moons";  // two_moons | csv
  int n = 300;
  double noise = 0.01;
  double flip_fraction = 0.2;
  double train_fraction = 0.5;
  std::string csv_path;       // kind == csv
  std::string test_csv_path;  // optional; otherwise csv_path is split
};

struct ModelSpec {
  std::string kind = "rff";  // linear | rff
  int features = 1000;
  double sigma_rff = 10.0;
};

/// Defaults follow the two-moons protocol: 300 points, 20% flipped training
/// labels, M = 1000, sigma 10, batch 50, step 5, alpha 1.
struct ExperimentSpec {
  DatasetSpec data;
  ModelSpec model;
  TrainConfig train;
  std::vector<double> alphas = {1.0};
  std::vector<Method> methods = all_methods();
  std::vector<PredictionMode> modes = {PredictionMode::Raw, PredictionMode::Rescaled};
  std::string out_dir = "out";
  int repetitions = 30;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency

  /// Seeds used by a sweep: seed, seed + 1, ..., seed + repetitions - 1.
  std::vector<std::uint64_t> seeds() const;
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::filesystem::path& path);
void validate(const ExperimentSpec& spec);

struct DataSplit {
  Dataset train;  // in the format the loss expects
  Dataset test;   // one-hot (or scalar) class targets
};

/// Sub-seeds: dataset = seed, split = seed + 1, flips = seed + 2.
DataSplit build_data(const DatasetSpec& spec, LossKind loss, std::uint64_t seed);
/// RFF frequencies use seed + 3.
Model build_model(const ModelSpec& spec, int input_dim, int output_dim, std::uint64_t seed);

struct RunRecord {
  Method method = Method::Erm;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  TrainResult result;
  std::vector<std::pair<PredictionMode, MetricsRow>> metrics;
  /// Regularizers at the trained model, evaluated with the run's alpha.
  RegularizerBreakdown breakdown;
};

/// One training run; SGD shuffling and Mixup draws use seed + 4.
RunRecord run_once(const ExperimentSpec& spec, Method method, double alpha, std::uint64_t seed);

/// All (alpha, method, seed) runs, computed in parallel and returned in
/// alpha-major, method, seed order.
std::vector<RunRecord> run_sweep(const ExperimentSpec& spec, std::span<const std::uint64_t> seeds);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t count = 0;
  bool has_ci() const { return count >= 2; }
};

/// Mean with a two-sided Student-t interval at the given level.
Interval t_interval(std::span<const double> values, double level = 0.95);

void write_runs_csv(std::span<const RunRecord> runs, const std::filesystem::path& path);
/// One row per (method, alpha, mode): mean and 95% CI half-width of each metric.
void write_summary_csv(std::span<const RunRecord> runs, const std::filesystem::path& path);
void write_metrics_csv(std::span<const RunRecord> runs, const std::filesystem::path& path);
void write_histogram_csv(const MetricsRow& row, const std::filesystem::path& path);
void write_breakdown_csv(std::span<const RegularizerBreakdown> rows, const std::filesystem::path& path);

}  // namespace mixreg

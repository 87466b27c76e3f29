#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mixreg/dataset.hpp"
#include "mixreg/model.hpp"

namespace mixreg {

enum class PredictionMode { Raw, Rescaled };

std::string_view to_string(PredictionMode mode);
PredictionMode parse_prediction_mode(std::string_view name);

/// Training-set statistics frozen next to a model for rescaled prediction.
/// `y_mean` is the class-frequency vector (one entry per class), even for a
/// scalar-logit model.
struct RescaleStats {
  Vec x_mean;
  Vec y_mean;
  double theta_bar = 1.0;
};

/// ybar (1 - 1/theta_bar) + f(theta_bar x + (1 - theta_bar) xbar) / theta_bar.
/// ybar must have the model's output size.
Vec rescaled_predict(const Model& model, const Vec& x, const Vec& xbar, const Vec& ybar, double theta_bar);

/// Class logits. A scalar-logit model u is lifted to (0, u) before the
/// rescaling so that both modes work with class-frequency vectors.
Vec class_logits(const Model& model, const Vec& x, PredictionMode mode, const RescaleStats& stats);
Vec class_probabilities(const Model& model, const Vec& x, PredictionMode mode, const RescaleStats& stats);

/// Binned expected calibration error with `n_bins` equal-width right-closed
/// bins on (0, 1]; a confidence of exactly 0 falls into the first bin.
double ece(std::span<const double> confidences, std::span<const int> correct, int n_bins = 15);

inline constexpr int kEceBins = 15;
inline constexpr int kConfidenceBins = 20;

struct MetricsRow {
  double accuracy = 0.0;
  double ce_loss = 0.0;
  double ece = 0.0;
  double mean_entropy = 0.0;
  double mean_confidence = 0.0;
  std::vector<std::size_t> confidence_histogram;  // kConfidenceBins counts on [0, 1]
};

/// Test metrics. Targets may be one-hot / on the simplex, or a single {0,1}
/// column that is lifted to (1 - y, y).
MetricsRow metrics(const Model& model, const Dataset& test, PredictionMode mode, const RescaleStats& stats);

nlohmann::json metrics_to_json(const MetricsRow& row);

nlohmann::json rescale_to_json(const RescaleStats& stats);
RescaleStats rescale_from_json(const nlohmann::json& j);

}  // namespace mixreg

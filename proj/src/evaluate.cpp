#include "mixreg/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mixreg/loss.hpp"

namespace mixreg {
namespace {

Vec lift(const Vec& u) {
  if (u.size() != 1) return u;
  Vec out(2);
  out << 0.0, u(0);
  return out;
}

Vec class_targets(const Dataset& ds, std::size_t i) {
  const Vec y = ds.output(i);
  if (y.size() != 1) return y;
  Vec out(2);
  out << 1.0 - y(0), y(0);
  return out;
}

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string_view to_string(PredictionMode mode) { return mode == PredictionMode::Raw ? "raw" : "rescaled"; }

PredictionMode parse_prediction_mode(std::string_view name) {
  if (name == "raw") return PredictionMode::Raw;
  if (name == "rescaled") return PredictionMode::Rescaled;
  throw std::invalid_argument("unknown prediction mode '" + std::string(name) + "'");
}

Vec rescaled_predict(const Model& model, const Vec& x, const Vec& xbar, const Vec& ybar, double theta_bar) {
  if (!(theta_bar >= 0.5 && theta_bar <= 1.0)) throw std::domain_error("theta_bar must lie in [1/2, 1]");
  const Vec shrunk = theta_bar * x + (1.0 - theta_bar) * xbar;
  return ybar * (1.0 - 1.0 / theta_bar) + predict(model, shrunk) / theta_bar;
}

Vec class_logits(const Model& model, const Vec& x, PredictionMode mode, const RescaleStats& stats) {
  if (mode == PredictionMode::Raw) return lift(predict(model, x));
  const double tb = stats.theta_bar;
  if (!(tb >= 0.5 && tb <= 1.0)) throw std::domain_error("theta_bar must lie in [1/2, 1]");
  const Vec shrunk = tb * x + (1.0 - tb) * stats.x_mean;
  const Vec u = lift(predict(model, shrunk));
  if (stats.y_mean.size() != u.size()) throw std::invalid_argument("class mean has the wrong size");
  return stats.y_mean * (1.0 - 1.0 / tb) + u / tb;
}

Vec class_probabilities(const Model& model, const Vec& x, PredictionMode mode, const RescaleStats& stats) {
  return softmax(class_logits(model, x, mode, stats));
}

double ece(std::span<const double> confidences, std::span<const int> correct, int n_bins) {
  if (confidences.size() != correct.size()) throw std::invalid_argument("ece: size mismatch");
  if (n_bins < 1) throw std::invalid_argument("ece: need at least one bin");
  if (confidences.empty()) return 0.0;
  std::vector<double> conf_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n_bins), 0);
  for (std::size_t k = 0; k < confidences.size(); ++k) {
    const double c = confidences[k];
    if (!(c >= 0.0 && c <= 1.0)) throw std::domain_error("ece: confidence outside [0, 1]");
    int b = static_cast<int>(std::ceil(c * n_bins)) - 1;
    b = std::clamp(b, 0, n_bins - 1);
    conf_sum[static_cast<std::size_t>(b)] += c;
    acc_sum[static_cast<std::size_t>(b)] += correct[k] ? 1.0 : 0.0;
    ++count[static_cast<std::size_t>(b)];
  }
  double total = 0.0;
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const double m = static_cast<double>(count[b]);
    total += (m / n) * std::abs(acc_sum[b] / m - conf_sum[b] / m);
  }
  return total;
}

MetricsRow metrics(const Model& model, const Dataset& test, PredictionMode mode, const RescaleStats& stats) {
  const std::size_t n = test.size();
  MetricsRow row;
  row.confidence_histogram.assign(kConfidenceBins, 0);
  std::vector<double> confidences(n);
  std::vector<int> correct(n);
  double hits = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec u = class_logits(model, test.input(i), mode, stats);
    const Vec p = softmax(u);
    const Vec y = class_targets(test, i);
    if (y.size() != p.size()) throw std::invalid_argument("metrics: target and prediction sizes differ");
    Eigen::Index pred = 0;
    const double conf = p.maxCoeff(&pred);
    Eigen::Index label = 0;
    y.maxCoeff(&label);
    correct[i] = pred == label ? 1 : 0;
    hits += correct[i];
    confidences[i] = conf;
    row.ce_loss += log_sum_exp(u) - y.dot(u);
    row.mean_entropy += entropy(p);
    row.mean_confidence += conf;
    const int bin = std::min(kConfidenceBins - 1, static_cast<int>(conf * kConfidenceBins));
    ++row.confidence_histogram[static_cast<std::size_t>(bin)];
  }
  const double nn = static_cast<double>(n);
  row.accuracy = hits / nn;
  row.ce_loss /= nn;
  row.mean_entropy /= nn;
  row.mean_confidence /= nn;
  row.ece = ece(confidences, correct, kEceBins);
  return row;
}

nlohmann::json metrics_to_json(const MetricsRow& row) {
  return {{"accuracy", row.accuracy},         {"ce_loss", row.ce_loss},
          {"ece", row.ece},                   {"mean_entropy", row.mean_entropy},
          {"mean_confidence", row.mean_confidence}, {"confidence_histogram", row.confidence_histogram}};
}

nlohmann::json rescale_to_json(const RescaleStats& stats) {
  return {{"x_mean", to_vector(stats.x_mean)}, {"y_mean", to_vector(stats.y_mean)}, {"theta_bar", stats.theta_bar}};
}

RescaleStats rescale_from_json(const nlohmann::json& j) {
  RescaleStats s;
  s.x_mean = from_vector(j.at("x_mean").get<std::vector<double>>());
  s.y_mean = from_vector(j.at("y_mean").get<std::vector<double>>());
  s.theta_bar = j.at("theta_bar").get<double>();
  return s;
}

}  // namespace mixreg

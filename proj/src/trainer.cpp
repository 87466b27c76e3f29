#include "mixreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include "mixreg/beta_moments.hpp"
#include "mixreg/mixup.hpp"
#include "mixreg/random.hpp"

namespace mixreg {
namespace {

std::vector<PointFeatures> cache_features(const Model& model, const Dataset& ds) {
  std::vector<PointFeatures> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(features(model, ds.input(i)));
  return out;
}

// Adds the parameter gradient of l(y, f) at cached features; returns the loss.
double accumulate(const Model& model, LossKind kind, const PointFeatures& pf, const Vec& y, Vec& grad) {
  const Vec u = predict(model, pf);
  const LossBundle b = bundle(kind, y, u);
  grad += pullback(model, pf, b.grad_u, Mat::Zero(u.size(), pf.dphi.cols()));
  return b.value;
}

Vec lift_logits(const Vec& u) {
  if (u.size() != 1) return u;
  Vec out(2);
  out << 0.0, u(0);
  return out;
}

Vec lift_targets(const Vec& y) {
  if (y.size() != 1) return y;
  Vec out(2);
  out << 1.0 - y(0), y(0);
  return out;
}

struct EvalSummary {
  double accuracy = 0.0;
  double ce = 0.0;
};

EvalSummary summarize(const Model& model, const Dataset& ds, const std::vector<PointFeatures>& cache,
                      const std::vector<int>& labels) {
  EvalSummary s;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Vec u = lift_logits(predict(model, cache[i]));
    Eigen::Index pred = 0;
    u.maxCoeff(&pred);
    s.accuracy += static_cast<int>(pred) == labels[i] ? 1.0 : 0.0;
    s.ce += log_sum_exp(u) - lift_targets(ds.output(i)).dot(u);
  }
  s.accuracy /= static_cast<double>(ds.size());
  s.ce /= static_cast<double>(ds.size());
  return s;
}

void validate(const Dataset& train_set, const Model& model, const TrainConfig& cfg) {
  if (cfg.batch_size < 1 || static_cast<std::size_t>(cfg.batch_size) > train_set.size()) {
    throw std::invalid_argument("batch size must lie in [1, n]");
  }
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  if (cfg.method != Method::Erm && (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))) {
    throw std::domain_error("alpha must be positive for Mixup-type methods");
  }
  if (output_dim(model) != train_set.output_dim()) {
    throw std::invalid_argument("model output size does not match the training targets");
  }
  if (input_dim(model) != train_set.input_dim()) {
    throw std::invalid_argument("model input size does not match the training inputs");
  }
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Erm: return "erm";
    case Method::Mixup: return "mixup";
    case Method::ErmModified: return "erm_modified";
    case Method::MixupApprox: return "mixup_approx";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const Method m : all_methods()) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() { return {Method::Erm, Method::Mixup, Method::ErmModified, Method::MixupApprox}; }

Vec class_mean(const Dataset& ds) { return lift_targets(ds.y_mean()); }

Vec approx_gradient(const RegularizationContext& ctx, std::span<const std::size_t> rows, const Model& model,
                    LossKind kind, bool drop_r2) {
  Vec g;
  approx_objective_rows(ctx, model, kind, drop_r2, rows, &g);
  return g;
}

TrainResult train(const Dataset& train_set, const Dataset& test_set, Model init, const TrainConfig& cfg) {
  validate(train_set, init, cfg);
  const MixCoefficients coeffs = cfg.method == Method::Erm ? MixCoefficients{} : coefficients(cfg.alpha);
  const std::size_t n = train_set.size();

  TrainResult result{std::move(init), {}, {}};
  Model& model = result.model;
  result.rescale = RescaleStats{train_set.x_mean(), class_mean(train_set),
                                cfg.method == Method::Erm ? 1.0 : coeffs.theta_bar};

  // Fixed training points for ERM variants.
  std::optional<Dataset> fixed;
  if (cfg.method == Method::Erm) fixed = train_set;
  if (cfg.method == Method::ErmModified) fixed = modify(train_set, coeffs.theta_bar).data;
  std::vector<PointFeatures> fixed_cache;
  if (fixed) fixed_cache = cache_features(model, *fixed);
  std::optional<RegularizationContext> ctx;
  if (cfg.method == Method::MixupApprox) ctx.emplace(train_set, coeffs);

  const auto train_cache = cache_features(model, train_set);
  const auto test_cache = cache_features(model, test_set);
  const auto train_labels = class_labels(train_set);
  const auto test_labels = class_labels(test_set);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vec params = parameters(model);
  Vec velocity = Vec::Zero(params.size());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double objective_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, n - start));
      const double m = static_cast<double>(rows.size());
      Vec grad = Vec::Zero(params.size());
      double objective = 0.0;
      switch (cfg.method) {
        case Method::Erm:
        case Method::ErmModified:
          for (const std::size_t i : rows) objective += accumulate(model, cfg.loss, fixed_cache[i], fixed->output(i), grad);
          objective /= m;
          grad /= m;
          break;
        case Method::Mixup: {
          Mat bx(rows.size(), train_set.input_dim());
          Mat by(rows.size(), train_set.output_dim());
          for (std::size_t r = 0; r < rows.size(); ++r) {
            bx.row(static_cast<Eigen::Index>(r)) = train_set.inputs().row(static_cast<Eigen::Index>(rows[r]));
            by.row(static_cast<Eigen::Index>(r)) = train_set.outputs().row(static_cast<Eigen::Index>(rows[r]));
          }
          const MixedBatch mixed = mixup_minibatch(bx, by, cfg.alpha, rng, cfg.shared_lambda);
          for (Eigen::Index r = 0; r < mixed.inputs.rows(); ++r) {
            const PointFeatures pf = features(model, Vec(mixed.inputs.row(r).transpose()));
            objective += accumulate(model, cfg.loss, pf, mixed.outputs.row(r).transpose(), grad);
          }
          objective /= m;
          grad /= m;
          break;
        }
        case Method::MixupApprox:
          objective = approx_objective_rows(*ctx, model, cfg.loss, cfg.drop_r2, rows, &grad);
          break;
      }
      if (!std::isfinite(objective) || !grad.allFinite()) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " (" +
                                 std::string(to_string(cfg.method)) +
                                 "): non-finite objective, the step size is probably too large");
      }
      if (cfg.weight_decay != 0.0) grad += cfg.weight_decay * params;
      velocity = cfg.momentum * velocity + grad;
      params -= cfg.step_size * velocity;
      set_parameters(model, params);
      objective_sum += objective;
      ++batches;
    }
    const EvalSummary tr = summarize(model, train_set, train_cache, train_labels);
    const EvalSummary te = summarize(model, test_set, test_cache, test_labels);
    result.trace.rows.push_back(
        TraceRow{epoch, objective_sum / static_cast<double>(batches), tr.accuracy, te.accuracy, te.ce});
  }
  return result;
}

void save_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "epoch,objective,train_acc,test_acc,test_loss\n";
  for (const auto& r : trace.rows) {
    out << r.epoch << ',' << r.objective << ',' << r.train_acc << ',' << r.test_acc << ',' << r.test_loss << '\n';
  }
}

}  // namespace mixreg

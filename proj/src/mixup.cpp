#include "mixreg/mixup.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mixreg {
namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::domain_error("alpha must be positive");
}

// Welford accumulator.
struct Running {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }

  void merge(const Running& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double total = static_cast<double>(n + o.n);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.n) / total;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
    n += o.n;
  }

  McEstimate estimate() const {
    McEstimate e;
    e.mean = mean;
    e.draws = n;
    e.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return e;
  }
};

std::size_t uniform_index(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  return pick(rng);
}

Running mixup_block(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                    std::size_t n_draws, Rng& rng) {
  Running acc;
  for (std::size_t k = 0; k < n_draws; ++k) {
    acc.add(mixup_summand(ds, model, kind, draw_mixup(ds.size(), alpha, rng)));
  }
  return acc;
}

}  // namespace

MixupDraw draw_mixup(std::size_t n, double alpha, Rng& rng) {
  MixupDraw d;
  d.i = uniform_index(n, rng);
  d.j = uniform_index(n, rng);
  d.lambda = sample_beta_symmetric(alpha, rng);
  return d;
}

double mixup_summand(const Dataset& ds, const Model& model, LossKind kind, const MixupDraw& draw) {
  const auto i = static_cast<Eigen::Index>(draw.i);
  const auto j = static_cast<Eigen::Index>(draw.j);
  const double l = draw.lambda;
  const Vec x = (l * ds.inputs().row(i) + (1.0 - l) * ds.inputs().row(j)).transpose();
  const Vec y = (l * ds.outputs().row(i) + (1.0 - l) * ds.outputs().row(j)).transpose();
  return loss_value(kind, y, predict(model, x));
}

McEstimate mixup_risk_mc(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                         std::size_t n_draws, Rng& rng) {
  require_alpha(alpha);
  if (n_draws < 1) throw std::invalid_argument("need at least one draw");
  return mixup_block(ds, model, kind, alpha, n_draws, rng).estimate();
}

McEstimate mixup_risk_mc(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                         std::size_t n_draws, std::uint64_t seed, unsigned workers) {
  require_alpha(alpha);
  if (n_draws < 1) throw std::invalid_argument("need at least one draw");
  if (workers < 1) workers = 1;
  std::vector<Running> parts(workers);
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t share = n_draws / workers + (w < n_draws % workers ? 1 : 0);
    threads.emplace_back([&, w, share] {
      Rng rng(worker_seed(seed, w));
      parts[w] = mixup_block(ds, model, kind, alpha, share, rng);
    });
  }
  for (auto& t : threads) t.join();
  Running total;
  for (const auto& p : parts) total.merge(p);
  return total.estimate();
}

PerturbationDraw perturbation_at(const Dataset& ds, double theta_bar, std::size_t i, std::size_t j,
                                 double theta) {
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  PerturbationDraw p;
  p.i = i;
  p.j = j;
  p.theta = theta;
  p.delta = ((theta - theta_bar) * ds.inputs().row(ii) + (1.0 - theta) * ds.inputs().row(jj)).transpose() -
            (1.0 - theta_bar) * ds.x_mean();
  p.epsilon = ((theta - theta_bar) * ds.outputs().row(ii) + (1.0 - theta) * ds.outputs().row(jj)).transpose() -
              (1.0 - theta_bar) * ds.y_mean();
  return p;
}

PerturbationDraw sample_perturbation(const Dataset& ds, const MixCoefficients& coeffs, std::size_t i,
                                     Rng& rng) {
  if (i >= ds.size()) throw std::out_of_range("perturbation index out of range");
  const double theta = sample_theta(coeffs.alpha, rng);
  const std::size_t j = uniform_index(ds.size(), rng);
  return perturbation_at(ds, coeffs.theta_bar, i, j, theta);
}

double perturbed_summand(const Dataset& ds, double theta_bar, const Model& model, LossKind kind,
                         const PerturbationDraw& draw) {
  const Vec xi = ds.input(draw.i);
  const Vec yi = ds.output(draw.i);
  const Vec x_mod = ds.x_mean() + theta_bar * (xi - ds.x_mean());
  const Vec y_mod = ds.y_mean() + theta_bar * (yi - ds.y_mean());
  return loss_value(kind, y_mod + draw.epsilon, predict(model, Vec(x_mod + draw.delta)));
}

McEstimate perturbed_erm_risk_mc(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                                 std::size_t n_draws, Rng& rng) {
  require_alpha(alpha);
  if (n_draws < 1) throw std::invalid_argument("need at least one draw");
  const MixCoefficients coeffs = coefficients(alpha);
  Running acc;
  for (std::size_t k = 0; k < n_draws; ++k) {
    const std::size_t i = uniform_index(ds.size(), rng);
    const PerturbationDraw p = sample_perturbation(ds, coeffs, i, rng);
    acc.add(perturbed_summand(ds, coeffs.theta_bar, model, kind, p));
  }
  return acc.estimate();
}

MixedBatch mixup_minibatch(const Mat& batch_x, const Mat& batch_y, double alpha, Rng& rng,
                           bool shared_lambda) {
  require_alpha(alpha);
  const auto m = batch_x.rows();
  if (m < 1) throw std::invalid_argument("empty minibatch");
  if (batch_y.rows() != m) throw std::invalid_argument("minibatch inputs and outputs differ in size");
  MixedBatch out;
  out.inputs.resize(m, batch_x.cols());
  out.outputs.resize(m, batch_y.cols());
  out.partners.resize(static_cast<std::size_t>(m));
  out.lambdas.resize(static_cast<std::size_t>(m));
  const double shared = shared_lambda ? sample_beta_symmetric(alpha, rng) : 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto j = static_cast<Eigen::Index>(uniform_index(static_cast<std::size_t>(m), rng));
    const double l = shared_lambda ? shared : sample_beta_symmetric(alpha, rng);
    out.inputs.row(r) = l * batch_x.row(r) + (1.0 - l) * batch_x.row(j);
    out.outputs.row(r) = l * batch_y.row(r) + (1.0 - l) * batch_y.row(j);
    out.partners[static_cast<std::size_t>(r)] = static_cast<std::size_t>(j);
    out.lambdas[static_cast<std::size_t>(r)] = l;
  }
  return out;
}

}  // namespace mixreg

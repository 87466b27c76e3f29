#include <doctest.h>

#include <cmath>

#include "mixreg/beta_moments.hpp"
#include "mixreg/mixup.hpp"
#include "mixreg/random.hpp"

using namespace mixreg;

namespace {

Mat gaussian(Eigen::Index r, Eigen::Index c, double sd, Rng& rng) {
  std::normal_distribution<double> g(0.0, sd);
  Mat m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

double erm_risk(const Dataset& ds, const Model& model, LossKind kind) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) s += loss_value(kind, ds.output(i), predict(model, ds.input(i)));
  return s / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("constant predictor: estimator equals the label-only expectation on shared draws") {
  Rng data_rng(1);
  const Dataset ds(gaussian(8, 2, 1.0, data_rng), gaussian(8, 3, 1.0, data_rng));
  const LinearModel constant{Mat::Zero(3, 2), ds.y_mean()};
  Rng a(5), b(5);
  const McEstimate est = mixup_risk_mc(ds, constant, LossKind::SquaredError, 1.0, 5000, a);
  double direct = 0.0;
  for (int k = 0; k < 5000; ++k) {
    const MixupDraw d = draw_mixup(ds.size(), 1.0, b);
    direct += 0.5 * (d.lambda * (ds.output(d.i) - ds.y_mean()) + (1 - d.lambda) * (ds.output(d.j) - ds.y_mean()))
                        .squaredNorm();
  }
  CHECK(est.mean == doctest::Approx(direct / 5000).epsilon(1e-12));
}

TEST_CASE("small alpha approaches the empirical risk") {
  Rng rng(2);
  const Dataset ds(gaussian(10, 2, 1.0, rng), gaussian(10, 1, 1.0, rng));
  const LinearModel lin{gaussian(1, 2, 1.0, rng), Vec::Zero(1)};
  Rng draws(3);
  const McEstimate est = mixup_risk_mc(ds, lin, LossKind::SquaredError, 0.01, 200000, draws);
  CHECK(std::abs(est.mean - erm_risk(ds, lin, LossKind::SquaredError)) < 3.0 * est.std_error);

  Rng pdraws(4);
  const McEstimate pert = perturbed_erm_risk_mc(ds, lin, LossKind::SquaredError, 0.01, 200000, pdraws);
  CHECK(std::abs(pert.mean - erm_risk(ds, lin, LossKind::SquaredError)) < 3.0 * pert.std_error);
}

TEST_CASE("linear least squares: Monte-Carlo risk matches the exact affine form") {
  // Exact Mixup risk of f(x) = w x + b under squared error:
  //   kappa / n sum 1/2 (y_i - w x_i - bbar)^2 + 1/2 (b - bbar)^2,
  //   kappa = 2 sigma^2 + theta_bar^2 + (1 - theta_bar)^2, bbar = ybar - w xbar.
  Mat x(4, 1), y(4, 1);
  x << -1.0, 0.5, 2.0, 3.0;
  y << 0.3, -0.2, 1.7, 0.4;
  const Dataset ds(x, y);
  const double w = 0.7, b = -0.4;
  const LinearModel lin{Mat::Constant(1, 1, w), Vec::Constant(1, b)};
  const MixCoefficients c = coefficients(1.0);
  const double kappa = 2 * c.sigma_sq + c.theta_bar * c.theta_bar + (1 - c.theta_bar) * (1 - c.theta_bar);
  const double bbar = ds.y_mean()(0) - w * ds.x_mean()(0);
  double erm = 0.0;
  for (int i = 0; i < 4; ++i) erm += 0.5 * std::pow(y(i, 0) - w * x(i, 0) - bbar, 2) / 4.0;
  const double exact = kappa * erm + 0.5 * (b - bbar) * (b - bbar);
  Rng rng(6);
  const McEstimate est = mixup_risk_mc(ds, lin, LossKind::SquaredError, 1.0, 1000000, rng);
  CHECK(std::abs(est.mean - exact) < 4.0 * est.std_error);
}

TEST_CASE("perturbations") {
  Mat x(3, 1), y(3, 1);
  x << 0.0, 1.0, 2.0;
  y << 1.0, 0.0, 1.0;
  const Dataset ds(x, y);
  const double tb = coefficients(1.0).theta_bar;
  SUBCASE("theta = theta_bar and a partner at the mean give zero input noise") {
    const PerturbationDraw p = perturbation_at(ds, tb, 0, 1, tb);
    CHECK(std::abs(p.delta(0)) < 1e-15);
  }
  SUBCASE("modified point plus noise is the mixed point") {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double theta = 0.62;
        const PerturbationDraw p = perturbation_at(ds, tb, i, j, theta);
        const double tilde = ds.x_mean()(0) + tb * (x(i, 0) - ds.x_mean()(0));
        CHECK(tilde + p.delta(0) == doctest::Approx(theta * x(i, 0) + (1 - theta) * x(j, 0)).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("per-draw identity for a linear least-squares model") {
  Rng rng(7);
  const Dataset ds(gaussian(10, 2, 1.0, rng), gaussian(10, 2, 1.0, rng));
  const LinearModel lin{gaussian(2, 2, 1.0, rng), gaussian(2, 1, 1.0, rng).col(0)};
  const MixCoefficients c = coefficients(0.7);
  double worst = 0.0;
  for (int k = 0; k < 5000; ++k) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, ds.size() - 1)(rng);
    const PerturbationDraw p = sample_perturbation(ds, c, i, rng);
    worst = std::max(worst, std::abs(perturbed_summand(ds, c.theta_bar, lin, LossKind::SquaredError, p) -
                                     mixup_summand(ds, lin, LossKind::SquaredError, {p.i, p.j, p.theta})));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("perturbation noise has zero mean") {
  Rng rng(8);
  const Dataset ds(gaussian(12, 2, 1.0, rng), gaussian(12, 2, 1.0, rng));
  const MixCoefficients c = coefficients(1.0);
  const int draws = 200000;
  Vec sum = Vec::Zero(4), sq = Vec::Zero(4);
  for (int k = 0; k < draws; ++k) {
    const PerturbationDraw p = sample_perturbation(ds, c, 5, rng);
    Vec v(4);
    v << p.delta, p.epsilon;
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const Vec mean = sum / draws;
  const Vec se = ((sq / draws - mean.cwiseProduct(mean)) / draws).cwiseSqrt();
  for (int k = 0; k < 4; ++k) CHECK(std::abs(mean(k)) < 4.0 * se(k));
}

TEST_CASE("seeded estimator is reproducible and independent of the worker count for a fixed seed") {
  Rng rng(9);
  const Dataset ds(gaussian(10, 2, 1.0, rng), gaussian(10, 1, 1.0, rng));
  const LinearModel lin{gaussian(1, 2, 1.0, rng), Vec::Zero(1)};
  const McEstimate a = mixup_risk_mc(ds, lin, LossKind::SquaredError, 1.0, 10000, 11, 2);
  const McEstimate b = mixup_risk_mc(ds, lin, LossKind::SquaredError, 1.0, 10000, 11, 2);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.draws == 10000);
}

TEST_CASE("minibatch mixing") {
  Rng rng(10);
  const Mat bx = gaussian(6, 2, 1.0, rng);
  Mat by = gaussian(6, 3, 1.0, rng).array().exp();
  for (Eigen::Index r = 0; r < by.rows(); ++r) by.row(r) /= by.row(r).sum();

  const MixedBatch mb = mixup_minibatch(bx, by, 0.4, rng);
  for (Eigen::Index r = 0; r < 6; ++r) {
    const double l = mb.lambdas[static_cast<std::size_t>(r)];
    const auto j = static_cast<Eigen::Index>(mb.partners[static_cast<std::size_t>(r)]);
    CHECK((mb.inputs.row(r) - (l * bx.row(r) + (1 - l) * bx.row(j))).cwiseAbs().maxCoeff() == 0.0);
    CHECK(mb.outputs.row(r).sum() == doctest::Approx(1.0));
    CHECK(mb.outputs.row(r).minCoeff() >= 0.0);
  }

  const MixedBatch shared = mixup_minibatch(bx, by, 1.0, rng, true);
  for (const double l : shared.lambdas) CHECK(l == shared.lambdas.front());

  Vec total = Vec::Zero(2), sq = Vec::Zero(2);
  const int reps = 100000;
  for (int k = 0; k < reps; ++k) {
    const Vec m = mixup_minibatch(bx, by, 1.0, rng).inputs.colwise().mean().transpose();
    total += m;
    sq += m.cwiseProduct(m);
  }
  const Vec mean = total / reps;
  const Vec se = ((sq / reps - mean.cwiseProduct(mean)) / reps).cwiseSqrt();
  const Vec target = bx.colwise().mean().transpose();
  for (int k = 0; k < 2; ++k) CHECK(std::abs(mean(k) - target(k)) < 4.0 * se(k));
}

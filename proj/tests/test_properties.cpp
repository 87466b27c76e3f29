// Randomised invariants across modules. Every case draws fresh instances from
// a fixed seed, so failures are reproducible.
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mixreg/beta_moments.hpp"
#include "mixreg/evaluate.hpp"
#include "mixreg/mixup.hpp"
#include "mixreg/regularization.hpp"

using namespace mixreg;

namespace {

Mat gaussian(Eigen::Index r, Eigen::Index c, double sd, Rng& rng) {
  std::normal_distribution<double> g(0.0, sd);
  Mat m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

int uniform_int(int lo, int hi, Rng& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(double lo, double hi, Rng& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Mat simplex_rows(Eigen::Index n, Eigen::Index c, Rng& rng) {
  Mat y = gaussian(n, c, 1.0, rng).array().exp();
  for (Eigen::Index r = 0; r < n; ++r) y.row(r) /= y.row(r).sum();
  return y;
}

Model random_model(int d, int c, Rng& rng) {
  if (uniform_int(0, 1, rng) == 0) return LinearModel{gaussian(c, d, 1.0, rng), gaussian(c, 1, 1.0, rng).col(0)};
  RffModel m = init_rff(d, uniform_int(5, 40, rng), uniform(0.5, 5.0, rng), c, rng());
  m.head = gaussian(c, m.features(), 1.0, rng);
  return m;
}

// Random (dataset, loss) pair whose targets suit the loss.
std::pair<Dataset, LossKind> random_problem(Rng& rng) {
  const int n = uniform_int(2, 15, rng), d = uniform_int(1, 4, rng);
  const LossKind kind = std::array{LossKind::CrossEntropy, LossKind::Logistic, LossKind::SquaredError}[uniform_int(0, 2, rng)];
  const Mat x = gaussian(n, d, 1.5, rng);
  switch (kind) {
    case LossKind::CrossEntropy: return {Dataset(x, simplex_rows(n, uniform_int(2, 4, rng), rng)), kind};
    case LossKind::Logistic: return {Dataset(x, simplex_rows(n, 2, rng).col(1)), kind};
    default: return {Dataset(x, gaussian(n, uniform_int(1, 3, rng), 1.0, rng)), kind};
  }
}

bool psd(const Mat& m, double tol) { return Eigen::SelfAdjointEigenSolver<Mat>(m).eigenvalues().minCoeff() >= -tol; }

}  // namespace

TEST_CASE("truncated Beta coefficients") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const double alpha = std::exp(uniform(std::log(0.05), std::log(50.0), rng));
    const MixCoefficients c = coefficients(alpha);
    CHECK(c.theta_bar > 0.5);
    CHECK(c.theta_bar < 1.0);
    CHECK(c.sigma_sq >= 0.0);
    CHECK(c.gamma_sq == doctest::Approx(c.sigma_sq + (1 - c.theta_bar) * (1 - c.theta_bar)).epsilon(1e-14));
    // Variance of a variable supported on [1/2, 1].
    CHECK(c.sigma_sq <= 1.0 / 16.0);
  }
}

TEST_CASE("modified data keeps the means and inverts") {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const int n = uniform_int(1, 20, rng), d = uniform_int(1, 4, rng), c = uniform_int(1, 3, rng);
    const Dataset ds(gaussian(n, d, 2.0, rng), gaussian(n, c, 1.0, rng));
    const double tb = uniform(0.5, 1.0, rng);
    const ModifiedDataset mod = modify(ds, tb);
    CHECK((mod.data.x_mean() - ds.x_mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mod.data.y_mean() - ds.y_mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((unmodify(mod).inputs() - ds.inputs()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("loss structure") {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const int c = uniform_int(2, 6, rng);
    const Vec u = gaussian(c, 1, 3.0, rng).col(0);
    const Vec y = simplex_rows(1, c, rng).row(0).transpose();
    const Vec p = softmax(u);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.minCoeff() > 0.0);
    const LossBundle b = bundle(LossKind::CrossEntropy, y, u);
    CHECK(psd(b.hess_uu, 1e-14));
    // Softmax Hessian annihilates the ones vector.
    CHECK((b.hess_uu * Vec::Ones(c)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(entropy(p) >= 0.0);
    CHECK(entropy(p) <= std::log(static_cast<double>(c)) + 1e-14);
  }
}

TEST_CASE("Mixup summand equals the perturbed form on every draw") {
  Rng rng(4);
  for (int k = 0; k < 30; ++k) {
    const auto [ds, kind] = random_problem(rng);
    const Model model = random_model(ds.input_dim(), ds.output_dim(), rng);
    const MixCoefficients coeffs = coefficients(uniform(0.1, 5.0, rng));
    for (int t = 0; t < 50; ++t) {
      const std::size_t i = static_cast<std::size_t>(uniform_int(0, static_cast<int>(ds.size()) - 1, rng));
      const PerturbationDraw p = sample_perturbation(ds, coeffs, i, rng);
      const double lhs = mixup_summand(ds, model, kind, {p.i, p.j, p.theta});
      const double rhs = perturbed_summand(ds, coeffs.theta_bar, model, kind, p);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("covariances are symmetric PSD and match the exact sum") {
  Rng rng(5);
  for (int k = 0; k < 40; ++k) {
    const auto [ds, kind] = random_problem(rng);
    const MixCoefficients coeffs = coefficients(uniform(0.1, 5.0, rng));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const PerExampleCovariances a = per_example_covariances(ds, coeffs, i);
      const PerExampleCovariances b = exact_second_moments(ds, coeffs, i);
      CHECK(psd(a.sxx, 1e-12));
      CHECK(psd(a.syy, 1e-12));
      CHECK((a.sxx - a.sxx.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, a.sxx.norm()));
      CHECK((a.sxy - b.sxy).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((a.sxx - b.sxx).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("regularizer signs, totals and specialised paths") {
  Rng rng(6);
  for (int k = 0; k < 40; ++k) {
    const auto [ds, kind] = random_problem(rng);
    const Model model = random_model(ds.input_dim(), ds.output_dim(), rng);
    const RegularizationContext ctx(ds, coefficients(uniform(0.1, 5.0, rng)));
    const RegularizerBreakdown b = r_terms_general(ctx, model, kind);
    CAPTURE(to_string(kind));
    CHECK(b.r1 >= 0.0);
    CHECK(b.r4 >= 0.0);
    CHECK(b.r3 <= 0.0);
    CHECK(std::abs(b.total - (b.erm_modified + b.r1 + b.r2 + b.r3 + b.r4)) <= 1e-12 * std::max(1.0, std::abs(b.total)));
    const RegularizerBreakdown s = kind == LossKind::CrossEntropy ? r_terms_ce(ctx, model)
                                   : kind == LossKind::Logistic   ? r_terms_lr(ctx, model)
                                                                  : r_terms_se(ctx, model);
    const double scale = std::max(1.0, std::abs(b.total));
    CHECK(std::abs(s.r1 - b.r1) <= 1e-10 * scale);
    CHECK(std::abs(s.r2 - b.r2) <= 1e-10 * scale);
    CHECK(std::abs(s.r3 - b.r3) <= 1e-10 * scale);
    CHECK(std::abs(s.r4 - b.r4) <= 1e-10 * scale);
    if (std::holds_alternative<LinearModel>(model)) CHECK(b.r2 == 0.0);
  }
}

TEST_CASE("rescaled prediction identities") {
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    const int d = uniform_int(1, 4, rng), c = uniform_int(2, 4, rng);
    const Model model = random_model(d, c, rng);
    const Vec x = gaussian(d, 1, 1.0, rng).col(0), xbar = gaussian(d, 1, 1.0, rng).col(0);
    CHECK(rescaled_predict(model, x, xbar, simplex_rows(1, c, rng).row(0).transpose(), 1.0) == predict(model, x));
    const double tb = uniform(0.5, 1.0, rng);
    const RescaleStats balanced{xbar, Vec::Constant(c, 1.0 / c), tb};
    Eigen::Index a = 0, b = 0;
    class_logits(model, x, PredictionMode::Rescaled, balanced).maxCoeff(&a);
    predict(model, Vec(tb * x + (1 - tb) * xbar)).maxCoeff(&b);
    CHECK(a == b);
  }
}

TEST_CASE("metrics ranges") {
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const int c = uniform_int(2, 4, rng), n = uniform_int(5, 60, rng);
    Mat y = Mat::Zero(n, c);
    for (int r = 0; r < n; ++r) y(r, uniform_int(0, c - 1, rng)) = 1.0;
    const Dataset test(gaussian(n, 2, 1.0, rng), y);
    const Model model = random_model(2, c, rng);
    const RescaleStats stats{test.x_mean(), Vec::Constant(c, 1.0 / c), uniform(0.5, 1.0, rng)};
    for (const PredictionMode mode : {PredictionMode::Raw, PredictionMode::Rescaled}) {
      const MetricsRow m = metrics(model, test, mode, stats);
      CHECK(m.accuracy >= 0.0);
      CHECK(m.accuracy <= 1.0);
      CHECK(m.ece >= 0.0);
      CHECK(m.ece <= 1.0);
      CHECK(m.mean_confidence >= 1.0 / c - 1e-12);
      CHECK(m.ce_loss >= 0.0);
      CHECK(std::accumulate(m.confidence_histogram.begin(), m.confidence_histogram.end(), std::size_t{0}) ==
            static_cast<std::size_t>(n));
    }
  }
}

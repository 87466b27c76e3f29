#include <doctest.h>

#include <cmath>

#include "mixreg/fault.hpp"
#include "mixreg/verify.hpp"
#include "oracles.hpp"

using namespace mixreg;

namespace {

const verify::RunOptions kQuick{20000, 100000, 100000, 200};

bool any_failed(const std::vector<verify::CheckReport>& reports) {
  for (const auto& r : reports)
    if (!r.passed) return true;
  return false;
}

bool failed(const std::vector<verify::CheckReport>& reports, const std::string& prefix) {
  for (const auto& r : reports)
    if (r.name.rfind(prefix, 0) == 0 && !r.passed) return true;
  return false;
}

}  // namespace

TEST_CASE("Gauss-Legendre rule") {
  for (const int n : {5, 200}) {
    const verify::QuadratureRule& rule = verify::gauss_legendre(n);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
    double sum = 0.0;
    for (const double w : rule.weights) sum += w;
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
    // Exact for polynomials of degree 2n - 1.
    const int deg = 2 * n - 2;
    double moment = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) moment += rule.weights[k] * std::pow(rule.nodes[k], deg);
    CHECK(moment == doctest::Approx(2.0 / (deg + 1)).epsilon(1e-12));
    CHECK(rule.nodes.front() == doctest::Approx(-rule.nodes.back()).epsilon(1e-15));
  }
}

TEST_CASE("truncated Beta quadrature agrees with the tanh-sinh oracle") {
  for (const double alpha : {0.05, 0.3, 1.0, 4.0, 15.0}) {
    CAPTURE(alpha);
    const verify::QuadratureRule rule = verify::trunc_beta_rule(alpha, 400);
    double sum = 0.0;
    for (const double w : rule.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    for (const double t : rule.nodes) {
      CHECK(t >= 0.5);
      CHECK(t <= 1.0);
    }
    auto cubic = [](double t) { return t * t * t - 0.3 * t; };
    int nodes = 0;
    const double value = verify::trunc_beta_expectation(alpha, cubic, 1e-12, &nodes);
    CHECK(value == doctest::Approx(oracle::trunc_beta_expect(alpha, cubic)).epsilon(1e-10));
    CHECK(nodes >= 200);
    CHECK(verify::trunc_beta_expectation(alpha, [](double t) { return t; }) ==
          doctest::Approx(oracle::trunc_beta_mean_ibeta(alpha)).epsilon(1e-10));
  }
}

TEST_CASE("individual checks pass on their canned instances") {
  CHECK(verify::check_beta_moments().passed);
  CHECK(verify::check_lemma_hand_value().passed);
  CHECK(verify::check_lemma_exact(1, 5).passed);
  CHECK(verify::check_taylor_se_linear(2).passed);
  CHECK(verify::check_rescale_identity(3).passed);

  Rng rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat x(10, 2), y(10, 2), w(2, 2);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = g(rng);
  const verify::CheckReport identity =
      verify::check_thm1_identity(Dataset(x, y), LinearModel{w, Vec::Zero(2)}, LossKind::SquaredError, 1.0, 10000, 5);
  CHECK(identity.passed);
  CHECK(identity.discrepancy < 1e-12);

  const verify::MolsReport mols = verify::check_mols(6);
  CHECK(mols.exact_line.passed);
  CHECK(mols.stationarity.passed);
  CHECK(mols.affine.passed);
  // The literal coefficient with unit intercept weight does not fit the exact risk.
  CHECK(mols.literal_form_spread > 1e-3);

  const verify::CheckReport smoothing = verify::check_label_smoothing(7, 3);
  CHECK(smoothing.passed);
  CHECK(smoothing.discrepancy <= smoothing.tolerance);
}

TEST_CASE("healthy build: every registered check passes and states its tolerance") {
  const auto reports = verify::run_all(11, kQuick);
  CHECK(reports.size() == 24);
  for (const auto& r : reports) {
    CAPTURE(r.name);
    CAPTURE(r.note);
    CHECK(r.passed);
    CHECK(r.discrepancy <= r.tolerance);
    CHECK(std::isfinite(r.tolerance));
  }
  const nlohmann::json j = verify::to_json(reports, 11);
  CHECK(j.at("seed") == 11);
  REQUIRE(j.at("checks").size() == reports.size());
  for (const auto& c : j.at("checks")) {
    CHECK(c.contains("tolerance"));
    CHECK(c.contains("discrepancy"));
    CHECK(c.contains("passed"));
  }
}

TEST_CASE("every formula mutation is caught by a sentinel check") {
  REQUIRE_FALSE(any_failed(verify::run_sentinel_checks(12)));
  for (const fault::Mutation m : fault::all_mutations()) {
    CAPTURE(fault::to_string(m));
    std::vector<verify::CheckReport> reports;
    {
      const fault::ScopedMutation scope(m);
      CHECK(fault::active() == m);
      reports = verify::run_sentinel_checks(12);
    }
    CHECK(any_failed(reports));
    CHECK(fault::active() == fault::Mutation::None);
  }
  {
    const fault::ScopedMutation scope(fault::Mutation::DropSigmaSq);
    CHECK(failed(verify::run_sentinel_checks(12), "lemma"));
  }
  {
    const fault::ScopedMutation scope(fault::Mutation::FlipR3Sign);
    CHECK(failed(verify::run_sentinel_checks(12), "thm2"));
  }
  CHECK_FALSE(any_failed(verify::run_sentinel_checks(12)));
}

TEST_CASE("mutation names") {
  for (const fault::Mutation m : fault::all_mutations()) CHECK(fault::parse(fault::to_string(m)) == m);
  CHECK_FALSE(fault::parse("drop_everything").has_value());
}

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixreg/beta_moments.hpp"
#include "mixreg/dataset.hpp"
#include "mixreg/loss.hpp"
#include "mixreg/model.hpp"

namespace mixreg::verify {

/// passed == (discrepancy <= tolerance), except that a check may also fail
/// for a reason recorded in `note` (e.g. an optimizer that did not converge).
struct CheckReport {
  std::string name;
  bool passed = false;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  double runtime_seconds = 0.0;
  std::string note;
};

nlohmann::json to_json(const CheckReport& r);
nlohmann::json to_json(const std::vector<CheckReport>& reports, std::uint64_t seed);

// ---- quadrature oracle over theta ~ Beta_[1/2,1](alpha, alpha) ----

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(int n);

/// n-node rule for the truncated Beta with weights normalised to sum to one.
/// Uses v = (1 - t)^(alpha / k), k = max(1, ceil(6 alpha)), which turns the
/// (1 - t)^(alpha - 1) endpoint singularity into the polynomial v^(k - 1).
QuadratureRule trunc_beta_rule(double alpha, int n);

/// E[g(theta)], doubling the node count from 200 until two successive
/// estimates differ by less than `tol` (relative to max(1, |value|)).
double trunc_beta_expectation(double alpha, const std::function<double(double)>& g, double tol = 1e-10,
                              int* nodes_used = nullptr);

/// Smallest rule (from 200 nodes, doubling) whose E[theta] and E[theta^2]
/// are stable to `tol`. Exact for integrands that are quadratic in theta up
/// to that tolerance.
QuadratureRule adaptive_moment_rule(double alpha, double tol = 1e-10);

// ---- checks ----

CheckReport check_beta_moments();

CheckReport check_thm1_identity(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                                std::size_t draws, std::uint64_t seed);
CheckReport check_thm1_estimators(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                                  std::size_t draws, std::uint64_t seed);
CheckReport check_thm1_zero_mean(const Dataset& ds, double alpha, std::size_t draws, std::uint64_t seed);

CheckReport check_lemma_exact(std::uint64_t seed, int datasets = 20);
CheckReport check_lemma_hand_value();
CheckReport check_lemma_mc(const Dataset& ds, double alpha, std::size_t i, std::size_t draws, std::uint64_t seed);

/// Quadrature-exact E[l_Q] against erm_modified + R1 + R2 + R3 + R4.
CheckReport check_thm2(const std::string& name, const Dataset& ds, const Model& model, LossKind kind,
                       double alpha);

/// Specialised corollary paths against the general one, term by term.
CheckReport check_corollaries(LossKind kind, std::uint64_t seed, int configs = 20);

/// Closed-form OLS is stationary for the exact Mixup risk, and the risk is
/// affine in the ERM loss of the intercept-corrected model.
struct MolsReport {
  CheckReport exact_line;
  CheckReport stationarity;
  CheckReport affine;
  /// Residual spread with the literal coefficient (0.614583 at alpha = 1) and
  /// unit intercept weight, for the record; not a pass/fail criterion.
  double literal_form_spread = 0.0;
};
MolsReport check_mols(std::uint64_t seed, double alpha = 1.0);

/// theta_bar avgZ(p) + (1 - theta_bar) Z(ybar) <= avgZ(p~) + 1e-9 on random
/// linear cross-entropy problems solved to gradient norm < 1e-8.
CheckReport check_label_smoothing(std::uint64_t seed, int problems = 10, double alpha = 1.0);

/// Cubic decay of |l - l_Q| (RFF + CE) and exactness for SE + linear.
CheckReport check_taylor_decay(const Dataset& ds, const Model& model, double alpha, std::uint64_t seed);
CheckReport check_taylor_se_linear(std::uint64_t seed);

/// Analytic derivatives of every loss and model against central differences.
CheckReport check_loss_derivatives(std::uint64_t seed, int points = 100);
CheckReport check_model_derivatives(std::uint64_t seed, int points = 100);

/// Rescaled prediction identities.
CheckReport check_rescale_identity(std::uint64_t seed);
CheckReport check_rescale_centered(std::uint64_t seed);
CheckReport check_rescale_argmax(std::uint64_t seed);

/// Canned desk-scale instances used by run_all and the acceptance suite.
struct Instances {
  Dataset moons_ce;        // two-moons, one-hot outputs
  Dataset moons_lr;        // same inputs, scalar outputs
  Model rff_ce;            // random head, c = 2
  Model rff_lr;            // random head, c = 1
};
Instances make_instances(std::size_t n, int rff_features, std::uint64_t seed);

struct RunOptions {
  std::size_t identity_draws = 100000;
  std::size_t estimator_draws = 1000000;
  std::size_t lemma_draws = 1000000;
  int rff_features = 1000;
};

std::vector<CheckReport> run_all(std::uint64_t seed, const RunOptions& options = {});

/// The checks that guard formula constants; cheap enough to rerun under
/// every fault mutation.
std::vector<CheckReport> run_sentinel_checks(std::uint64_t seed);

}  // namespace mixreg::verify

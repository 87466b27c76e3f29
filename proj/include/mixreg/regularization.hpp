#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mixreg/beta_moments.hpp"
#include "mixreg/dataset.hpp"
#include "mixreg/loss.hpp"
#include "mixreg/model.hpp"

namespace mixreg {

/// Second moments of the perturbation (delta_i, epsilon_i) of example i.
struct PerExampleCovariances {
  Mat sxx;  // d x d
  Mat syy;  // c x c
  Mat sxy;  // d x c
};

/// sxx = sigma^2 (x_i - xbar)(x_i - xbar)^T + gamma^2 Sxx, likewise syy, sxy.
PerExampleCovariances per_example_covariances(const Dataset& ds, const MixCoefficients& coeffs,
                                              std::size_t i);

/// E[delta delta^T], E[eps eps^T], E[delta eps^T] by an exact sum over the
/// partner j and the raw moments E[theta], E[theta^2] of the truncated Beta.
/// Shares no algebra with per_example_covariances.
PerExampleCovariances exact_second_moments(const Dataset& ds, const MixCoefficients& coeffs,
                                           std::size_t i);

/// Six-term quadratic Taylor model of l(y~_i + eps, f(x~_i + delta)) around
/// the modified pair i.
double quadratic_loss(const ModifiedDataset& mod, const Model& model, LossKind kind, std::size_t i,
                      const Vec& delta, const Vec& epsilon);

struct RegularizerBreakdown {
  double erm_modified = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double total = 0.0;
  /// Examples whose input covariance needed eigenvalue truncation.
  std::size_t truncated_covariances = 0;
  /// Examples whose loss Hessian needed eigenvalue truncation (always all of
  /// them for cross-entropy, whose Hessian annihilates the ones vector).
  std::size_t truncated_hessians = 0;

  double regularization() const { return r1 + r2 + r3 + r4; }
};

/// Data-only quantities shared by every evaluation at a fixed alpha: the
/// modified dataset, the per-example covariances, and their pseudo-inverses.
class RegularizationContext {
 public:
  RegularizationContext(const Dataset& ds, const MixCoefficients& coeffs);

  const Dataset& original() const { return original_; }
  const ModifiedDataset& modified() const { return modified_; }
  const MixCoefficients& coeffs() const { return coeffs_; }
  std::size_t size() const { return covariances_.size(); }
  const PerExampleCovariances& covariances(std::size_t i) const { return covariances_[i]; }
  const Mat& sxx_pinv(std::size_t i) const { return sxx_pinv_[i]; }
  bool sxx_truncated(std::size_t i) const { return sxx_truncated_[i] != 0; }

 private:
  Dataset original_;
  ModifiedDataset modified_;
  MixCoefficients coeffs_;
  std::vector<PerExampleCovariances> covariances_;
  std::vector<Mat> sxx_pinv_;
  std::vector<char> sxx_truncated_;
};

/// Erm term and R1..R4 of a single example (not yet divided by n).
struct ExampleTerms {
  double erm = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  bool covariance_truncated = false;
  bool hessian_truncated = false;
};

/// General formulas: J = -H^+ B_uy Syx Sxx^+, R1 = 1/2 |(G - J)^T H^1/2|^2_Sxx,
/// R2 = 1/2 <Sxx, g . hess f>, R3 = -1/2 |Sxy B_yu H^-1/2|^2_{Sxx^+},
/// R4 = 1/2 <Syy, hess_yy l>.
ExampleTerms example_terms_general(const RegularizationContext& ctx, const Model& model, LossKind kind,
                                   std::size_t i);

RegularizerBreakdown r_terms_general(const RegularizationContext& ctx, const Model& model, LossKind kind);
RegularizerBreakdown r_terms_general(const Dataset& ds, const Model& model, LossKind kind,
                                     const MixCoefficients& coeffs);

/// Closed forms specialised to cross-entropy, logistic and squared error.
/// For squared error the model-independent constant C is reported as r4.
RegularizerBreakdown r_terms_ce(const RegularizationContext& ctx, const Model& model);
RegularizerBreakdown r_terms_lr(const RegularizationContext& ctx, const Model& model);
RegularizerBreakdown r_terms_se(const RegularizationContext& ctx, const Model& model);

/// erm_modified + r1 + r3 + r4, plus r2 unless drop_r2.
double approx_mixup_objective(const RegularizationContext& ctx, const Model& model, LossKind kind,
                              bool drop_r2);
double approx_mixup_objective(const Dataset& ds, const Model& model, LossKind kind,
                              const MixCoefficients& coeffs, bool drop_r2);

/// The same objective restricted to `rows` (averaged over them) in the
/// completed-square form 1/2 <Sxx, G^T H G> + <Syx, B_yu G>, which equals
/// R1 + R3 without ever inverting H. Optionally returns the parameter
/// gradient.
double approx_objective_rows(const RegularizationContext& ctx, const Model& model, LossKind kind,
                             bool drop_r2, std::span<const std::size_t> rows, Vec* gradient);

}  // namespace mixreg

#pragma once

#include <cstddef>
#include <cstdint>

#include "mixreg/beta_moments.hpp"
#include "mixreg/dataset.hpp"
#include "mixreg/loss.hpp"
#include "mixreg/model.hpp"

namespace mixreg {

/// Monte-Carlo mean with its standard error.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

/// One Mixup draw: pair (i, j) and weight lambda ~ Beta(alpha, alpha).
struct MixupDraw {
  std::size_t i = 0;
  std::size_t j = 0;
  double lambda = 1.0;
};

/// Draws i, then j, then lambda, in that order.
MixupDraw draw_mixup(std::size_t n, double alpha, Rng& rng);

/// l(lambda y_i + (1 - lambda) y_j, f(lambda x_i + (1 - lambda) x_j)).
double mixup_summand(const Dataset& ds, const Model& model, LossKind kind, const MixupDraw& draw);

/// Monte-Carlo estimate of the Mixup risk.
McEstimate mixup_risk_mc(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                         std::size_t n_draws, Rng& rng);

/// Same estimator split over `workers` threads; worker w uses
/// worker_seed(seed, w) and draws are reduced in worker order, so the result
/// depends only on (seed, workers).
McEstimate mixup_risk_mc(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                         std::size_t n_draws, std::uint64_t seed, unsigned workers);

/// Zero-mean perturbation of the modified pair i:
///   delta = (theta - theta_bar) x_i + (1 - theta) x_j - (1 - theta_bar) xbar
/// and likewise epsilon for the outputs.
struct PerturbationDraw {
  std::size_t i = 0;
  std::size_t j = 0;
  double theta = 1.0;
  Vec delta;
  Vec epsilon;
};

/// Deterministic perturbation for a given (i, j, theta).
PerturbationDraw perturbation_at(const Dataset& ds, double theta_bar, std::size_t i, std::size_t j,
                                 double theta);

/// Draws theta, then j.
PerturbationDraw sample_perturbation(const Dataset& ds, const MixCoefficients& coeffs, std::size_t i,
                                     Rng& rng);

/// l(y~_i + epsilon, f(x~_i + delta)) with the modified pair rebuilt from ds.
double perturbed_summand(const Dataset& ds, double theta_bar, const Model& model, LossKind kind,
                         const PerturbationDraw& draw);

/// Monte-Carlo estimate of ERM on modified data under random perturbations.
/// Draws i, then (theta, j) through sample_perturbation.
McEstimate perturbed_erm_risk_mc(const Dataset& ds, const Model& model, LossKind kind, double alpha,
                                 std::size_t n_draws, Rng& rng);

struct MixedBatch {
  Mat inputs;
  Mat outputs;
  std::vector<std::size_t> partners;
  std::vector<double> lambdas;
};

/// Pairs every row with a uniformly drawn row of the same batch and mixes
/// with lambda ~ Beta(alpha, alpha), one lambda per pair unless shared_lambda.
MixedBatch mixup_minibatch(const Mat& batch_x, const Mat& batch_y, double alpha, Rng& rng,
                           bool shared_lambda = false);

}  // namespace mixreg

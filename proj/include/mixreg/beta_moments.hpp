#pragma once

#include "mixreg/random.hpp"

namespace mixreg {

/// Mean and spread of theta ~ Beta_[1/2,1](alpha, alpha), the folded Mixup
/// coefficient. gamma_sq = sigma_sq + (1 - theta_bar)^2 = E[(1 - theta)^2].
struct MixCoefficients {
  double alpha = 1.0;
  double theta_bar = 0.75;
  double sigma_sq = 1.0 / 48.0;
  double gamma_sq = 1.0 / 12.0;
};

/// Regularized incomplete beta function I_x(a, b), evaluated with the
/// modified Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// E[theta] = 1 - I_{1/2}(alpha + 1, alpha).
double trunc_beta_mean(double alpha);

/// E[theta^k] for k in {1, 2}.
double trunc_beta_raw_moment(double alpha, int k);

MixCoefficients coefficients(double alpha);

/// lambda ~ Beta(alpha, alpha) from two log-space Gamma(alpha, 1) draws, so
/// that tiny alpha never produces 0/0.
double sample_beta_symmetric(double alpha, Rng& rng);

/// theta = max(lambda, 1 - lambda) with lambda ~ Beta(alpha, alpha).
double sample_theta(double alpha, Rng& rng);

}  // namespace mixreg

#include "mixreg/beta_moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mixreg/fault.hpp"

namespace mixreg {
namespace {

constexpr double kCfTolerance = 1e-15;
constexpr int kCfMaxIterations = 100000;
constexpr double kTiny = 1e-300;

void require_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::domain_error("alpha must be positive and finite, got " + std::to_string(alpha));
  }
}

// Continued fraction for I_x(a, b); converges fast for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kCfTolerance) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

double log_gamma_sample(double shape, Rng& rng) {
  // Gamma(a) = Gamma(a + 1) * U^(1/a) for a < 1, kept in log space.
  if (shape < 1.0) {
    std::gamma_distribution<double> boosted(shape + 1.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    return std::log(boosted(rng)) + std::log(u) / shape;
  }
  std::gamma_distribution<double> gamma(shape, 1.0);
  double g = gamma(rng);
  while (g <= 0.0) g = gamma(rng);
  return std::log(g);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete beta needs a, b > 0");
  if (x < 0.0 || x > 1.0) throw std::domain_error("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double trunc_beta_mean(double alpha) {
  require_alpha(alpha);
  return 1.0 - regularized_incomplete_beta(alpha + 1.0, alpha, 0.5);
}

double trunc_beta_raw_moment(double alpha, int k) {
  require_alpha(alpha);
  switch (k) {
    case 1:
      return trunc_beta_mean(alpha);
    case 2:
      // 2 B(a+2, a) / B(a, a) = (a + 1) / (2a + 1)
      return (alpha + 1.0) / (2.0 * alpha + 1.0) *
             (1.0 - regularized_incomplete_beta(alpha + 2.0, alpha, 0.5));
    default:
      throw std::domain_error("trunc_beta_raw_moment supports k in {1, 2}, got " +
                              std::to_string(k));
  }
}

MixCoefficients coefficients(double alpha) {
  MixCoefficients out;
  out.alpha = alpha;
  out.theta_bar = trunc_beta_raw_moment(alpha, 1);
  const double second = trunc_beta_raw_moment(alpha, 2);
  out.sigma_sq = std::max(0.0, second - out.theta_bar * out.theta_bar);
  if (fault::active() == fault::Mutation::ShiftThetaBar) out.theta_bar += 0.01;
  out.gamma_sq = out.sigma_sq + (1.0 - out.theta_bar) * (1.0 - out.theta_bar);
  return out;
}

double sample_beta_symmetric(double alpha, Rng& rng) {
  require_alpha(alpha);
  const double lx = log_gamma_sample(alpha, rng);
  const double ly = log_gamma_sample(alpha, rng);
  // X / (X + Y) = 1 / (1 + exp(ly - lx))
  return 1.0 / (1.0 + std::exp(ly - lx));
}

double sample_theta(double alpha, Rng& rng) {
  const double lambda = sample_beta_symmetric(alpha, rng);
  return std::max(lambda, 1.0 - lambda);
}

}  // namespace mixreg

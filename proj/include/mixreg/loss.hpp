#pragma once

#include <string_view>

#include "mixreg/linalg.hpp"

namespace mixreg {

enum class LossKind { SquaredError, CrossEntropy, Logistic };

std::string_view to_string(LossKind kind);
/// Accepts "squared_error"/"se", "cross_entropy"/"ce", "logistic"/"lr".
LossKind parse_loss_kind(std::string_view name);

/// Loss value and every first/second derivative block at (y, u).
/// Gradients are stored as column vectors; the row-vector convention of the
/// math is a transpose away. hess_yu(i, j) = d^2 l / dy_i du_j.
struct LossBundle {
  double value = 0.0;
  Vec grad_y;
  Vec grad_u;
  Mat hess_yy;
  Mat hess_yu;
  Mat hess_uu;
};

double log_sum_exp(const Vec& u);
Vec softmax(const Vec& u);
double sigmoid(double u);
/// H(u) = diag(S(u)) - S(u) S(u)^T.
Mat softmax_hessian(const Vec& u);
/// Natural-log entropy with 0 log 0 = 0. Throws if p is off the simplex by
/// more than 1e-9.
double entropy(const Vec& p);

double loss_value(LossKind kind, const Vec& y, const Vec& u);
LossBundle bundle(LossKind kind, const Vec& y, const Vec& u);

/// t_k = <M, d hess_uu / d u_k>: the third-derivative contraction needed to
/// differentiate curvature-weighted penalties with respect to u.
Vec hess_uu_directional(LossKind kind, const Vec& u, const Mat& m);

}  // namespace mixreg

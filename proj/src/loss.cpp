#include "mixreg/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixreg {
namespace {

void require_shapes(LossKind kind, const Vec& y, const Vec& u) {
  if (y.size() != u.size()) {
    throw std::invalid_argument("loss: target has " + std::to_string(y.size()) +
                                " entries, prediction has " + std::to_string(u.size()));
  }
  if (kind == LossKind::Logistic && u.size() != 1) {
    throw std::invalid_argument("logistic loss needs scalar targets and predictions");
  }
  if (u.size() == 0) throw std::invalid_argument("loss: empty prediction");
}

// log(1 + e^u) without overflow.
double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::SquaredError: return "squared_error";
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::Logistic: return "logistic";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "squared_error" || name == "se") return LossKind::SquaredError;
  if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
  if (name == "logistic" || name == "lr") return LossKind::Logistic;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

double log_sum_exp(const Vec& u) {
  const double m = u.maxCoeff();
  return m + std::log((u.array() - m).exp().sum());
}

Vec softmax(const Vec& u) {
  const Vec e = (u.array() - u.maxCoeff()).exp().matrix();
  return e / e.sum();
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

Mat softmax_hessian(const Vec& u) {
  const Vec p = softmax(u);
  Mat h = -p * p.transpose();
  h.diagonal() += p;
  return h;
}

double entropy(const Vec& p) {
  if (p.minCoeff() < -1e-9 || std::abs(p.sum() - 1.0) > 1e-9) {
    throw std::domain_error("entropy: argument is not on the simplex");
  }
  double z = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) > 0.0) z -= p(k) * std::log(p(k));
  }
  return z;
}

double loss_value(LossKind kind, const Vec& y, const Vec& u) {
  require_shapes(kind, y, u);
  switch (kind) {
    case LossKind::SquaredError: return 0.5 * (y - u).squaredNorm();
    case LossKind::CrossEntropy: return log_sum_exp(u) - y.dot(u);
    case LossKind::Logistic: return softplus(u(0)) - y(0) * u(0);
  }
  throw std::logic_error("unreachable loss kind");
}

LossBundle bundle(LossKind kind, const Vec& y, const Vec& u) {
  require_shapes(kind, y, u);
  const auto c = u.size();
  LossBundle b;
  b.value = loss_value(kind, y, u);
  switch (kind) {
    case LossKind::SquaredError:
      b.grad_y = y - u;
      b.grad_u = u - y;
      b.hess_yy = Mat::Identity(c, c);
      b.hess_yu = -Mat::Identity(c, c);
      b.hess_uu = Mat::Identity(c, c);
      break;
    case LossKind::CrossEntropy:
      b.grad_y = -u;
      b.grad_u = softmax(u) - y;
      b.hess_yy = Mat::Zero(c, c);
      b.hess_yu = -Mat::Identity(c, c);
      b.hess_uu = softmax_hessian(u);
      break;
    case LossKind::Logistic: {
      const double s = sigmoid(u(0));
      b.grad_y = Vec::Constant(1, -u(0));
      b.grad_u = Vec::Constant(1, s - y(0));
      b.hess_yy = Mat::Zero(1, 1);
      b.hess_yu = Mat::Constant(1, 1, -1.0);
      b.hess_uu = Mat::Constant(1, 1, s * (1.0 - s));
      break;
    }
  }
  return b;
}

Vec hess_uu_directional(LossKind kind, const Vec& u, const Mat& m) {
  switch (kind) {
    case LossKind::SquaredError: return Vec::Zero(u.size());
    case LossKind::Logistic: {
      const double s = sigmoid(u(0));
      return Vec::Constant(1, m(0, 0) * s * (1.0 - s) * (1.0 - 2.0 * s));
    }
    case LossKind::CrossEntropy: {
      // dH/du_k = diag(q_k) - q_k p^T - p q_k^T with q_k = dp/du_k.
      const Vec p = softmax(u);
      const Vec w = m.diagonal() - (m + m.transpose()) * p;
      // q_k = p .* (e_k - p_k 1), so t_k = p_k w_k - p_k (p . w)
      const double pw = p.dot(w);
      return (p.array() * (w.array() - pw)).matrix();
    }
  }
  throw std::logic_error("unreachable loss kind");
}

}  // namespace mixreg

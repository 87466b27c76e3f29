#include "mixreg/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mixreg {

SymmetricSpectrum::SymmetricSpectrum(const Mat& m) {
  const Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
  values = solver.eigenvalues();
  vectors = solver.eigenvectors();
  const double largest = values.size() > 0 ? values.cwiseAbs().maxCoeff() : 0.0;
  threshold_ = kPinvRelativeCutoff * largest;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (std::abs(values(k)) <= threshold_) truncated_ = true;
  }
}

Mat SymmetricSpectrum::pseudo_inverse() const {
  Vec inv = values;
  for (Eigen::Index k = 0; k < inv.size(); ++k) {
    inv(k) = std::abs(values(k)) > threshold_ && values(k) != 0.0 ? 1.0 / values(k) : 0.0;
  }
  return vectors * inv.asDiagonal() * vectors.transpose();
}

Mat SymmetricSpectrum::sqrt() const {
  Vec root = values.unaryExpr([](double v) { return std::sqrt(std::max(v, 0.0)); });
  return vectors * root.asDiagonal() * vectors.transpose();
}

Mat SymmetricSpectrum::inverse_sqrt() const {
  Vec inv = values;
  for (Eigen::Index k = 0; k < inv.size(); ++k) {
    inv(k) = values(k) > threshold_ ? 1.0 / std::sqrt(values(k)) : 0.0;
  }
  return vectors * inv.asDiagonal() * vectors.transpose();
}

}  // namespace mixreg

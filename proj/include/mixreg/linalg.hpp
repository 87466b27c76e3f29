#pragma once

#include <Eigen/Dense>

namespace mixreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Relative eigenvalue cutoff used by every pseudo-inverse in the library.
inline constexpr double kPinvRelativeCutoff = 1e-10;

/// Spectral functions of a symmetric matrix. Eigenvalues below
/// `kPinvRelativeCutoff * max|eigenvalue|` are treated as zero.
struct SymmetricSpectrum {
  explicit SymmetricSpectrum(const Mat& m);

  Mat pseudo_inverse() const;
  /// Square root with round-off negatives clamped to zero.
  Mat sqrt() const;
  /// Pseudo-inverse of the square root.
  Mat inverse_sqrt() const;

  /// True when at least one nonzero-but-tiny eigenvalue was dropped, or the
  /// matrix is rank deficient.
  bool truncated() const { return truncated_; }

  Eigen::VectorXd values;
  Mat vectors;

 private:
  double threshold_ = 0.0;
  bool truncated_ = false;
};

/// Frobenius inner product <A, B> = trace(A^T B).
inline double frobenius(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

}  // namespace mixreg

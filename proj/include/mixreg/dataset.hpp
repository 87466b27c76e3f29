#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mixreg/linalg.hpp"

namespace mixreg {

/// Divide-by-n first and second moments of a paired sample.
struct DatasetStats {
  Vec x_mean;
  Vec y_mean;
  Mat sxx;  // d x d
  Mat sxy;  // d x c
  Mat syy;  // c x c
};

DatasetStats compute_stats(const Mat& inputs, const Mat& outputs);

/// Immutable paired sample: rows of `inputs` (n x d) and `outputs` (n x c).
class Dataset {
 public:
  Dataset(Mat inputs, Mat outputs);

  const Mat& inputs() const { return inputs_; }
  const Mat& outputs() const { return outputs_; }
  Vec input(std::size_t i) const { return inputs_.row(static_cast<Eigen::Index>(i)).transpose(); }
  Vec output(std::size_t i) const { return outputs_.row(static_cast<Eigen::Index>(i)).transpose(); }

  std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }
  int input_dim() const { return static_cast<int>(inputs_.cols()); }
  int output_dim() const { return static_cast<int>(outputs_.cols()); }

  const DatasetStats& stats() const { return stats_; }
  const Vec& x_mean() const { return stats_.x_mean; }
  const Vec& y_mean() const { return stats_.y_mean; }

  /// Every output row is nonnegative and sums to one (within 1e-9).
  bool outputs_on_simplex() const;
  /// Every output row is a standard basis vector.
  bool outputs_one_hot() const;

  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  Mat inputs_;
  Mat outputs_;
  DatasetStats stats_;
};

/// Rows shrunk toward the mean: x~ = xbar + theta_bar (x - xbar), same for y.
struct ModifiedDataset {
  Dataset data;
  double theta_bar;
  /// Means of the source dataset (equal to the means of `data`).
  Vec x_mean;
  Vec y_mean;
};

ModifiedDataset modify(const Dataset& ds, double theta_bar);
/// Inverse of modify: x = xbar + (x~ - xbar) / theta_bar.
Dataset unmodify(const ModifiedDataset& mod);

/// Two interleaving half circles with one-hot labels; class 0 is the outer
/// moon (cos t, sin t), class 1 the inner moon (1 - cos t, 0.5 - sin t).
/// Row order is shuffled.
Dataset make_two_moons(int n, double noise, std::uint64_t seed);

/// Swaps the one-hot vectors of exactly round(fraction * n) rows (c = 2).
Dataset flip_labels(const Dataset& ds, double fraction, std::uint64_t seed);

/// Random split; the first round(train_fraction * n) shuffled rows train.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Scalar {0,1} view of a two-class one-hot dataset (column of class 1).
Dataset binary_scalar_view(const Dataset& ds);

/// Argmax class per row. A single-column output is thresholded at 1/2.
std::vector<int> class_labels(const Dataset& ds);

void save_csv(const Dataset& ds, const std::filesystem::path& path);
/// Reads the `x0..x{d-1},y0..y{c-1}` layout written by save_csv.
Dataset load_csv(const std::filesystem::path& path);

}  // namespace mixreg

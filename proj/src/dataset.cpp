#include "mixreg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "mixreg/random.hpp"

namespace mixreg {
namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("invalid number in CSV: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

DatasetStats compute_stats(const Mat& inputs, const Mat& outputs) {
  const double n = static_cast<double>(inputs.rows());
  DatasetStats s;
  s.x_mean = inputs.colwise().mean().transpose();
  s.y_mean = outputs.colwise().mean().transpose();
  const Mat xc = inputs.rowwise() - s.x_mean.transpose();
  const Mat yc = outputs.rowwise() - s.y_mean.transpose();
  s.sxx = xc.transpose() * xc / n;
  s.sxy = xc.transpose() * yc / n;
  s.syy = yc.transpose() * yc / n;
  return s;
}

Dataset::Dataset(Mat inputs, Mat outputs) : inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
  if (inputs_.rows() < 1) throw std::invalid_argument("dataset needs at least one row");
  if (inputs_.rows() != outputs_.rows()) {
    throw std::invalid_argument("inputs and outputs have different row counts");
  }
  if (inputs_.cols() < 1 || outputs_.cols() < 1) {
    throw std::invalid_argument("dataset needs at least one input and one output column");
  }
  stats_ = compute_stats(inputs_, outputs_);
}

bool Dataset::outputs_on_simplex() const {
  for (Eigen::Index i = 0; i < outputs_.rows(); ++i) {
    if (outputs_.row(i).minCoeff() < -1e-9) return false;
    if (std::abs(outputs_.row(i).sum() - 1.0) > 1e-9) return false;
  }
  return true;
}

bool Dataset::outputs_one_hot() const {
  for (Eigen::Index i = 0; i < outputs_.rows(); ++i) {
    int ones = 0;
    for (Eigen::Index k = 0; k < outputs_.cols(); ++k) {
      const double v = outputs_(i, k);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Mat x(static_cast<Eigen::Index>(rows.size()), inputs_.cols());
  Mat y(static_cast<Eigen::Index>(rows.size()), outputs_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= size()) throw std::out_of_range("subset row index out of range");
    x.row(static_cast<Eigen::Index>(r)) = inputs_.row(static_cast<Eigen::Index>(rows[r]));
    y.row(static_cast<Eigen::Index>(r)) = outputs_.row(static_cast<Eigen::Index>(rows[r]));
  }
  return Dataset(std::move(x), std::move(y));
}

ModifiedDataset modify(const Dataset& ds, double theta_bar) {
  if (!(theta_bar >= 0.5 && theta_bar <= 1.0)) {
    throw std::domain_error("theta_bar must lie in [1/2, 1], got " + std::to_string(theta_bar));
  }
  const Vec& xm = ds.x_mean();
  const Vec& ym = ds.y_mean();
  Mat x = (theta_bar * (ds.inputs().rowwise() - xm.transpose())).rowwise() + xm.transpose();
  Mat y = (theta_bar * (ds.outputs().rowwise() - ym.transpose())).rowwise() + ym.transpose();
  return ModifiedDataset{Dataset(std::move(x), std::move(y)), theta_bar, xm, ym};
}

Dataset unmodify(const ModifiedDataset& mod) {
  const double inv = 1.0 / mod.theta_bar;
  Mat x = (inv * (mod.data.inputs().rowwise() - mod.x_mean.transpose())).rowwise() +
          mod.x_mean.transpose();
  Mat y = (inv * (mod.data.outputs().rowwise() - mod.y_mean.transpose())).rowwise() +
          mod.y_mean.transpose();
  return Dataset(std::move(x), std::move(y));
}

Dataset make_two_moons(int n, double noise, std::uint64_t seed) {
  if (n < 4) throw std::domain_error("two moons needs n >= 4");
  if (n % 2 != 0) throw std::domain_error("two moons needs an even n");
  if (!(noise >= 0.0)) throw std::domain_error("noise must be nonnegative");
  const int n_outer = n / 2;
  const int n_inner = n - n_outer;
  Mat x(n, 2);
  Mat y = Mat::Zero(n, 2);
  const double pi = std::numbers::pi;
  for (int k = 0; k < n_outer; ++k) {
    const double t = n_outer > 1 ? pi * k / (n_outer - 1) : 0.0;
    x(k, 0) = std::cos(t);
    x(k, 1) = std::sin(t);
    y(k, 0) = 1.0;
  }
  for (int k = 0; k < n_inner; ++k) {
    const double t = n_inner > 1 ? pi * k / (n_inner - 1) : 0.0;
    x(n_outer + k, 0) = 1.0 - std::cos(t);
    x(n_outer + k, 1) = 0.5 - std::sin(t);
    y(n_outer + k, 1) = 1.0;
  }

  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Mat xs(n, 2);
  Mat ys(n, 2);
  for (int r = 0; r < n; ++r) {
    xs.row(r) = x.row(order[static_cast<std::size_t>(r)]);
    ys.row(r) = y.row(order[static_cast<std::size_t>(r)]);
  }
  if (noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise);
    for (int r = 0; r < n; ++r) {
      xs(r, 0) += gauss(rng);
      xs(r, 1) += gauss(rng);
    }
  }
  return Dataset(std::move(xs), std::move(ys));
}

Dataset flip_labels(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::domain_error("fraction must lie in [0, 1]");
  if (ds.output_dim() != 2 || !ds.outputs_one_hot()) {
    throw std::domain_error("flip_labels needs two-class one-hot outputs");
  }
  const std::size_t n = ds.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Mat y = ds.outputs();
  for (std::size_t k = 0; k < count; ++k) {
    const auto r = static_cast<Eigen::Index>(order[k]);
    std::swap(y(r, 0), y(r, 1));
  }
  return Dataset(ds.inputs(), std::move(y));
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  const std::size_t n = ds.size();
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw std::domain_error("split leaves an empty side");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::span<const std::size_t> all(order);
  return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

Dataset binary_scalar_view(const Dataset& ds) {
  if (ds.output_dim() != 2) throw std::domain_error("binary view needs two output columns");
  return Dataset(ds.inputs(), ds.outputs().col(1));
}

std::vector<int> class_labels(const Dataset& ds) {
  std::vector<int> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = ds.outputs().row(static_cast<Eigen::Index>(i));
    if (row.size() == 1) {
      labels[i] = row(0) >= 0.5 ? 1 : 0;
    } else {
      Eigen::Index k = 0;
      row.maxCoeff(&k);
      labels[i] = static_cast<int>(k);
    }
  }
  return labels;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const int d = ds.input_dim();
  const int c = ds.output_dim();
  for (int k = 0; k < d; ++k) out << (k ? "," : "") << 'x' << k;
  for (int k = 0; k < c; ++k) out << ",y" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < ds.inputs().rows(); ++i) {
    for (int k = 0; k < d; ++k) out << (k ? "," : "") << format_double(ds.inputs()(i, k));
    for (int k = 0; k < c; ++k) out << ',' << format_double(ds.outputs()(i, k));
    out << '\n';
  }
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + path.string());
  const auto header = split_line(line);
  int d = 0;
  int c = 0;
  for (const auto& h : header) {
    std::string name = h;
    while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
    if (!name.empty() && name[0] == 'x' && c == 0) {
      ++d;
    } else if (!name.empty() && name[0] == 'y') {
      ++c;
    } else {
      throw std::runtime_error("unexpected CSV column '" + name + "'");
    }
  }
  if (d == 0 || c == 0) throw std::runtime_error("CSV needs x and y columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (static_cast<int>(cells.size()) != d + c) throw std::runtime_error("ragged CSV row");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) row.push_back(parse_double(cell));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat x(n, d);
  Mat y(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) x(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    for (int k = 0; k < c; ++k) y(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d + k)];
  }
  return Dataset(std::move(x), std::move(y));
}

}  // namespace mixreg

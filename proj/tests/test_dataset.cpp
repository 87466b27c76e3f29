#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "mixreg/dataset.hpp"
#include "mixreg/random.hpp"
#include "oracles.hpp"

using namespace mixreg;

namespace {

Mat random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("noise-free moons lie on their half circles") {
  const Dataset ds = make_two_moons(40, 0.0, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Vec x = ds.input(i);
    if (ds.output(i)(0) == 1.0) {
      CHECK(x.norm() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(x(1) >= -1e-15);
    } else {
      CHECK(std::hypot(x(0) - 1.0, x(1) - 0.5) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(x(1) <= 0.5 + 1e-15);
    }
  }
}

TEST_CASE("two-moons default size is balanced") {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const Dataset ds = make_two_moons(300, 0.01, seed);
    CHECK(ds.size() == 300);
    CHECK(ds.outputs().col(0).sum() == 150.0);
    CHECK(ds.outputs().col(1).sum() == 150.0);
    CHECK(ds.outputs_one_hot());
  }
}

TEST_CASE("noise-free moons are not linearly separable") {
  const Dataset ds = make_two_moons(200, 0.0, 4);
  const auto labels = class_labels(ds);
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  double best = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double a = g(rng), b = g(rng), c = g(rng);
    int hits = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const int pred = a * ds.input(i)(0) + b * ds.input(i)(1) + c > 0 ? 1 : 0;
      hits += pred == labels[i];
    }
    best = std::max({best, hits / 200.0, 1.0 - hits / 200.0});
  }
  CHECK(best < 1.0);
}

TEST_CASE("label flips") {
  const Dataset ds = make_two_moons(150, 0.01, 2);
  const Dataset same = flip_labels(ds, 0.0, 3);
  CHECK(same.outputs() == ds.outputs());
  const Dataset all = flip_labels(ds, 1.0, 3);
  CHECK(flip_labels(all, 1.0, 3).outputs() == ds.outputs());
  const Dataset some = flip_labels(ds, 0.2, 3);
  int differ = 0;
  for (Eigen::Index i = 0; i < ds.outputs().rows(); ++i) differ += ds.outputs().row(i) != some.outputs().row(i);
  CHECK(differ == 30);
  CHECK(some.inputs() == ds.inputs());
}

TEST_CASE("statistics") {
  Mat x(2, 1), y(2, 1);
  x << -1.0, 1.0;
  y << 0.0, 1.0;
  const Dataset pair(x, y);
  CHECK(pair.x_mean()(0) == 0.0);
  CHECK(pair.stats().sxx(0, 0) == doctest::Approx(1.0));

  Rng rng(8);
  const Mat rx = random_matrix(5, 3, rng), ry = random_matrix(5, 2, rng);
  const Dataset ds(rx, ry);
  const auto naive = oracle::naive_moments(rx, ry);
  CHECK((ds.stats().sxx - naive.sxx).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ds.stats().sxy - naive.sxy).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ds.stats().syy - naive.syy).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ds.x_mean() - naive.x_mean).cwiseAbs().maxCoeff() < 1e-12);

  Mat dx(10, 3), dy(10, 2);
  dx << rx, rx;
  dy << ry, ry;
  const Dataset twice(dx, dy);
  CHECK((twice.stats().sxx - ds.stats().sxx).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((twice.stats().sxy - ds.stats().sxy).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modified data") {
  Mat x(2, 1), y(2, 1);
  x << 0.0, 2.0;
  y << 0.0, 1.0;
  const Dataset ds(x, y);
  const ModifiedDataset mod = modify(ds, 0.75);
  CHECK(mod.data.input(0)(0) == doctest::Approx(0.25));
  CHECK(mod.data.input(1)(0) == doctest::Approx(1.75));
  CHECK(mod.data.output(1)(0) == doctest::Approx(0.5 + 0.75 * 0.5));

  const ModifiedDataset identity = modify(ds, 1.0);
  CHECK(identity.data.inputs() == ds.inputs());
  CHECK(identity.data.outputs() == ds.outputs());

  Mat xm(3, 1), ym(3, 1);
  xm << 0.0, 1.0, 2.0;
  ym << 1.0, 2.0, 3.0;
  const ModifiedDataset fixed = modify(Dataset(xm, ym), 0.6);
  CHECK(fixed.data.input(1)(0) == doctest::Approx(1.0));

  Rng rng(9);
  const Dataset r(random_matrix(6, 2, rng), random_matrix(6, 2, rng));
  const Dataset back = unmodify(modify(r, 0.8));
  CHECK((back.inputs() - r.inputs()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS(modify(r, 0.4));
}

TEST_CASE("split and subset") {
  const Dataset ds = make_two_moons(100, 0.1, 1);
  const auto [train, test] = split(ds, 0.5, 2);
  CHECK(train.size() == 50);
  CHECK(test.size() == 50);
  CHECK_THROWS(split(ds, 0.0, 2));
  const auto again = split(ds, 0.5, 2);
  CHECK(again.first.inputs() == train.inputs());
}

TEST_CASE("CSV round trip is exact") {
  Rng rng(10);
  const Dataset ds(random_matrix(7, 3, rng), random_matrix(7, 2, rng));
  const auto path = std::filesystem::temp_directory_path() / "mixreg_roundtrip.csv";
  save_csv(ds, path);
  const Dataset back = load_csv(path);
  CHECK(back.inputs() == ds.inputs());
  CHECK(back.outputs() == ds.outputs());
  std::filesystem::remove(path);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS(Dataset(Mat(0, 2), Mat(0, 1)));
  CHECK_THROWS(Dataset(Mat::Zero(3, 2), Mat::Zero(2, 1)));
  CHECK_THROWS(make_two_moons(7, 0.1, 0));
}

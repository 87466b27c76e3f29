#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mixreg/trainer.hpp"
#include "mixreg/verify.hpp"
#include "oracles.hpp"

using namespace mixreg;

namespace {

Mat gaussian(Eigen::Index r, Eigen::Index c, double sd, Rng& rng) {
  std::normal_distribution<double> g(0.0, sd);
  Mat m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

struct Moons {
  Dataset train;  // scalar {0, 1} targets for the logistic loss
  Dataset test;   // one-hot
  Dataset train_one_hot;
};

Moons moons(std::uint64_t seed) {
  const auto [tr, te] = split(make_two_moons(300, 0.01, seed), 0.5, seed + 1);
  const Dataset flipped = flip_labels(tr, 0.2, seed + 2);
  return {binary_scalar_view(flipped), te, flipped};
}

TrainConfig config(Method method, int epochs, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (const Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS(parse_method("cutmix"));
}

TEST_CASE("same seed gives a bit-identical trace") {
  const Moons data = moons(1);
  for (const Method m : all_methods()) {
    CAPTURE(to_string(m));
    const Model init = init_rff(2, 100, 10.0, 1, 3);
    const TrainResult a = train(data.train, data.test, init, config(m, 15, 4));
    const TrainResult b = train(data.train, data.test, init, config(m, 15, 4));
    REQUIRE(a.trace.rows.size() == 15);
    for (std::size_t k = 0; k < a.trace.rows.size(); ++k) {
      CHECK(a.trace.rows[k].objective == b.trace.rows[k].objective);
      CHECK(a.trace.rows[k].test_acc == b.trace.rows[k].test_acc);
    }
    CHECK(parameters(a.model) == parameters(b.model));
  }
}

TEST_CASE("rescale statistics come from the training set") {
  const Moons data = moons(2);
  const Model init = init_rff(2, 50, 10.0, 1, 3);
  const TrainResult erm = train(data.train, data.test, init, config(Method::Erm, 1, 0));
  CHECK(erm.rescale.theta_bar == 1.0);
  CHECK(erm.rescale.x_mean == data.train.x_mean());
  CHECK(erm.rescale.y_mean.size() == 2);
  CHECK(erm.rescale.y_mean.sum() == doctest::Approx(1.0));
  const TrainResult mix = train(data.train, data.test, init, config(Method::Mixup, 1, 0));
  CHECK(mix.rescale.theta_bar == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("Mixup with a vanishing alpha behaves like ERM") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Moons data = moons(seed);
    const Model init = init_rff(2, 200, 10.0, 1, seed + 3);
    TrainConfig mix = config(Method::Mixup, 100, seed + 4);
    mix.alpha = 1e-4;
    const double erm_acc = train(data.train, data.test, init, config(Method::Erm, 100, seed + 4)).trace.rows.back().train_acc;
    const double mix_acc = train(data.train, data.test, init, mix).trace.rows.back().train_acc;
    CAPTURE(seed);
    CHECK(std::abs(erm_acc - mix_acc) <= 0.02);
  }
}

TEST_CASE("full-batch ERM on a linear model converges to OLS") {
  Rng rng(20);
  const Mat x = gaussian(20, 2, 1.0, rng), y = gaussian(20, 2, 1.0, rng);
  const Dataset ds(x, y);
  TrainConfig cfg = config(Method::Erm, 10000, 1);
  cfg.loss = LossKind::SquaredError;
  cfg.batch_size = 20;
  cfg.step_size = 0.1;
  const TrainResult r = train(ds, ds, LinearModel{Mat::Zero(2, 2), Vec::Zero(2)}, cfg);
  const auto [w, b] = oracle::ols(x, y);
  const auto& fit = std::get<LinearModel>(r.model);
  CHECK(std::sqrt((fit.weights - w).squaredNorm() + (fit.bias - b).squaredNorm()) < 1e-4);
}

TEST_CASE("convex problems reach the same optimum from different seeds") {
  const Moons data = moons(21);
  const Dataset& ce_train = data.train_one_hot;
  for (const LossKind kind : {LossKind::CrossEntropy, LossKind::SquaredError}) {
    TrainConfig cfg = config(Method::Erm, 4000, 1);
    cfg.loss = kind;
    cfg.batch_size = static_cast<int>(ce_train.size());
    cfg.step_size = 0.5;
    const Model init = LinearModel{Mat::Zero(2, 2), Vec::Zero(2)};
    const TrainResult a = train(ce_train, data.test, init, cfg);
    cfg.seed = 2;
    const TrainResult b = train(ce_train, data.test, init, cfg);
    CHECK(std::abs(a.trace.rows.back().objective - b.trace.rows.back().objective) < 1e-6);
  }
}

TEST_CASE("approximate-objective gradient") {
  SUBCASE("zero RFF head with cross-entropy") {
    const verify::Instances inst = verify::make_instances(20, 60, 22);
    const RegularizationContext ctx(inst.moons_ce, coefficients(1.0));
    const Model zero = init_rff(2, 60, 10.0, 2, 23);
    const auto rows = all_rows(ctx.size());
    const Vec g = approx_gradient(ctx, rows, zero, LossKind::CrossEntropy, true);
    REQUIRE(g.allFinite());
    auto f = [&](const Vec& p) {
      Model m = zero;
      set_parameters(m, p);
      return approx_mixup_objective(ctx, m, LossKind::CrossEntropy, true);
    };
    CHECK(oracle::max_rel(g, oracle::fd_gradient(f, parameters(zero))) < 1e-4);
  }
  SUBCASE("linear least squares") {
    Rng rng(24);
    const Dataset ds(gaussian(15, 3, 1.0, rng), gaussian(15, 2, 1.0, rng));
    const RegularizationContext ctx(ds, coefficients(1.0));
    const Model lin = LinearModel{gaussian(2, 3, 1.0, rng), gaussian(2, 1, 1.0, rng).col(0)};
    const Vec g = approx_gradient(ctx, all_rows(ds.size()), lin, LossKind::SquaredError, true);
    auto f = [&](const Vec& p) {
      Model m = lin;
      set_parameters(m, p);
      return approx_mixup_objective(ctx, m, LossKind::SquaredError, true);
    };
    CHECK(oracle::max_rel(g, oracle::fd_gradient(f, parameters(lin), 1e-4)) < 1e-8);
  }
  SUBCASE("vanishing covariances give the plain ERM gradient") {
    Rng rng(25);
    const Dataset ds(gaussian(10, 2, 1.0, rng), gaussian(10, 2, 1.0, rng));
    const RegularizationContext ctx(ds, coefficients(1e-9));
    const Model lin = LinearModel{gaussian(2, 2, 1.0, rng), gaussian(2, 1, 1.0, rng).col(0)};
    Vec erm = Vec::Zero(static_cast<Eigen::Index>(parameter_count(lin)));
    for (std::size_t i = 0; i < ds.size(); ++i) erm += param_gradient(lin, LossKind::SquaredError, ds.input(i), ds.output(i));
    erm /= static_cast<double>(ds.size());
    CHECK(oracle::max_rel(approx_gradient(ctx, all_rows(ds.size()), lin, LossKind::SquaredError, true), erm) < 1e-6);
  }
}

TEST_CASE("configuration errors and divergence") {
  const Moons data = moons(26);
  const Model init = init_rff(2, 20, 10.0, 1, 0);
  TrainConfig big = config(Method::Erm, 1, 0);
  big.batch_size = 1000;
  CHECK_THROWS(train(data.train, data.test, init, big));
  TrainConfig no_alpha = config(Method::Mixup, 1, 0);
  no_alpha.alpha = 0.0;
  CHECK_THROWS(train(data.train, data.test, init, no_alpha));
  CHECK_THROWS(train(data.train, data.test, init_rff(2, 20, 10.0, 2, 0), config(Method::Erm, 1, 0)));

  Rng rng(27);
  const Dataset ds(gaussian(20, 2, 30.0, rng), gaussian(20, 2, 30.0, rng));
  TrainConfig wild = config(Method::Erm, 200, 0);
  wild.loss = LossKind::SquaredError;
  wild.batch_size = 20;
  wild.step_size = 50.0;
  CHECK_THROWS_AS(train(ds, ds, LinearModel{Mat::Zero(2, 2), Vec::Zero(2)}, wild), std::runtime_error);
}

TEST_CASE("trace CSV") {
  const Moons data = moons(28);
  const TrainResult r = train(data.train, data.test, init_rff(2, 20, 10.0, 1, 0), config(Method::Erm, 3, 0));
  const auto path = std::filesystem::temp_directory_path() / "mixreg_trace.csv";
  save_trace_csv(r.trace, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  std::getline(in, line);
  CHECK(line == "epoch,objective,train_acc,test_acc,test_loss");
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);
  std::filesystem::remove(path);
}

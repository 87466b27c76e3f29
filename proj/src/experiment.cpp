#include "mixreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "mixreg/beta_moments.hpp"

namespace mixreg {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  return out;
}

const char* const kMetricNames[] = {"accuracy", "ce_loss", "ece", "mean_entropy", "mean_confidence"};

std::vector<double> metric_values(const MetricsRow& m) {
  return {m.accuracy, m.ce_loss, m.ece, m.mean_entropy, m.mean_confidence};
}

}  // namespace

std::vector<std::uint64_t> ExperimentSpec::seeds() const {
  std::vector<std::uint64_t> out;
  for (int r = 0; r < repetitions; ++r) out.push_back(seed + static_cast<std::uint64_t>(r));
  return out;
}

json spec_to_json(const ExperimentSpec& s) {
  json methods = json::array(), modes = json::array();
  for (const Method m : s.methods) methods.push_back(std::string(to_string(m)));
  for (const PredictionMode m : s.modes) modes.push_back(std::string(to_string(m)));
  return {{"dataset",
           {{"kind", s.data.kind},
            {"n", s.data.n},
            {"noise", s.data.noise},
            {"flip_fraction", s.data.flip_fraction},
            {"train_fraction", s.data.train_fraction},
            {"csv_path", s.data.csv_path},
            {"test_csv_path", s.data.test_csv_path}}},
          {"model", {{"kind", s.model.kind}, {"features", s.model.features}, {"sigma_rff", s.model.sigma_rff}}},
          {"train",
           {{"method", std::string(to_string(s.train.method))},
            {"alpha", s.train.alpha},
            {"epochs", s.train.epochs},
            {"batch_size", s.train.batch_size},
            {"step_size", s.train.step_size},
            {"drop_r2", s.train.drop_r2},
            {"momentum", s.train.momentum},
            {"weight_decay", s.train.weight_decay},
            {"shared_lambda", s.train.shared_lambda},
            {"loss", std::string(to_string(s.train.loss))}}},
          {"alphas", s.alphas},
          {"methods", methods},
          {"modes", modes},
          {"out_dir", s.out_dir},
          {"repetitions", s.repetitions},
          {"seed", s.seed},
          {"workers", s.workers}};
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  reject_unknown(j, {"dataset", "model", "train", "alphas", "methods", "modes", "out_dir", "repetitions", "seed", "workers"},
                 "spec");
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, {"kind", "n", "noise", "flip_fraction", "train_fraction", "csv_path", "test_csv_path"}, "dataset");
    read(d, "kind", s.data.kind);
    read(d, "n", s.data.n);
    read(d, "noise", s.data.noise);
    read(d, "flip_fraction", s.data.flip_fraction);
    read(d, "train_fraction", s.data.train_fraction);
    read(d, "csv_path", s.data.csv_path);
    read(d, "test_csv_path", s.data.test_csv_path);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"kind", "features", "sigma_rff"}, "model");
    read(m, "kind", s.model.kind);
    read(m, "features", s.model.features);
    read(m, "sigma_rff", s.model.sigma_rff);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, {"method", "alpha", "epochs", "batch_size", "step_size", "drop_r2", "momentum", "weight_decay",
                       "shared_lambda", "loss"},
                   "train");
    if (t.contains("method")) s.train.method = parse_method(t.at("method").get<std::string>());
    if (t.contains("loss")) s.train.loss = parse_loss_kind(t.at("loss").get<std::string>());
    read(t, "alpha", s.train.alpha);
    read(t, "epochs", s.train.epochs);
    read(t, "batch_size", s.train.batch_size);
    read(t, "step_size", s.train.step_size);
    read(t, "drop_r2", s.train.drop_r2);
    read(t, "momentum", s.train.momentum);
    read(t, "weight_decay", s.train.weight_decay);
    read(t, "shared_lambda", s.train.shared_lambda);
  }
  read(j, "alphas", s.alphas);
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("modes")) {
    s.modes.clear();
    for (const auto& m : j.at("modes")) s.modes.push_back(parse_prediction_mode(m.get<std::string>()));
  }
  read(j, "out_dir", s.out_dir);
  read(j, "repetitions", s.repetitions);
  read(j, "seed", s.seed);
  read(j, "workers", s.workers);
  validate(s);
  return s;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec " + path.string());
  return spec_from_json(json::parse(in));
}

void validate(const ExperimentSpec& s) {
  if (s.repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
  if (s.data.kind != "two_moons" && s.data.kind != "csv") throw std::invalid_argument("dataset kind must be two_moons or csv");
  if (s.data.kind == "csv" && s.data.csv_path.empty()) throw std::invalid_argument("csv dataset needs csv_path");
  if (!(s.data.flip_fraction >= 0.0 && s.data.flip_fraction <= 1.0)) {
    throw std::invalid_argument("flip_fraction must lie in [0, 1]");
  }
  if (!(s.data.train_fraction > 0.0 && s.data.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  if (!(s.data.noise >= 0.0)) throw std::invalid_argument("noise must be nonnegative");
  if (s.model.kind != "linear" && s.model.kind != "rff") throw std::invalid_argument("model kind must be linear or rff");
  if (s.model.kind == "rff" && (s.model.features < 1 || !(s.model.sigma_rff > 0.0))) {
    throw std::invalid_argument("rff needs features >= 1 and sigma_rff > 0");
  }
  if (s.alphas.empty() || s.methods.empty() || s.modes.empty()) {
    throw std::invalid_argument("alphas, methods and modes must be non-empty");
  }
  for (const double a : s.alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("alphas must be positive");
  }
}

DataSplit build_data(const DatasetSpec& spec, LossKind loss, std::uint64_t seed) {
  auto [train_set, test_set] = [&]() -> std::pair<Dataset, Dataset> {
    if (spec.kind == "two_moons") return split(make_two_moons(spec.n, spec.noise, seed), spec.train_fraction, seed + 1);
    if (spec.test_csv_path.empty()) return split(load_csv(spec.csv_path), spec.train_fraction, seed + 1);
    return {load_csv(spec.csv_path), load_csv(spec.test_csv_path)};
  }();
  if (spec.flip_fraction > 0.0) train_set = flip_labels(train_set, spec.flip_fraction, seed + 2);
  if (loss == LossKind::Logistic && train_set.output_dim() == 2) train_set = binary_scalar_view(train_set);
  return {std::move(train_set), std::move(test_set)};
}

Model build_model(const ModelSpec& spec, int input_dim, int output_dim, std::uint64_t seed) {
  if (spec.kind == "linear") return init_linear(input_dim, output_dim);
  return init_rff(input_dim, spec.features, spec.sigma_rff, output_dim, seed + 3);
}

RunRecord run_once(const ExperimentSpec& spec, Method method, double alpha, std::uint64_t seed) {
  const DataSplit data = build_data(spec.data, spec.train.loss, seed);
  TrainConfig cfg = spec.train;
  cfg.method = method;
  cfg.alpha = alpha;
  cfg.seed = seed + 4;
  cfg.batch_size = std::min<int>(cfg.batch_size, static_cast<int>(data.train.size()));
  RunRecord rec;
  rec.method = method;
  rec.alpha = alpha;
  rec.seed = seed;
  rec.result = train(data.train, data.test,
                     build_model(spec.model, data.train.input_dim(), data.train.output_dim(), seed), cfg);
  for (const PredictionMode mode : spec.modes) {
    rec.metrics.emplace_back(mode, metrics(rec.result.model, data.test, mode, rec.result.rescale));
  }
  rec.breakdown = r_terms_general(data.train, rec.result.model, spec.train.loss, coefficients(alpha));
  return rec;
}

std::vector<RunRecord> run_sweep(const ExperimentSpec& spec, std::span<const std::uint64_t> seeds) {
  struct Task {
    double alpha;
    Method method;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const double a : spec.alphas)
    for (const Method m : spec.methods)
      for (const std::uint64_t s : seeds) tasks.push_back({a, m, s});
  std::vector<RunRecord> out(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      try {
        out[k] = run_once(spec, tasks[k].method, tasks[k].alpha, tasks[k].seed);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  unsigned workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Interval t_interval(std::span<const double> values, double level) {
  Interval iv;
  iv.count = values.size();
  if (values.empty()) return iv;
  double sum = 0.0;
  for (const double v : values) sum += v;
  iv.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return iv;
  double ss = 0.0;
  for (const double v : values) ss += (v - iv.mean) * (v - iv.mean);
  const double n = static_cast<double>(values.size());
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double q = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  iv.half_width = q * sd / std::sqrt(n);
  return iv;
}

void write_metrics_csv(std::span<const RunRecord> runs, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,alpha,seed,mode,accuracy,ce_loss,ece,mean_entropy,mean_confidence\n";
  for (const auto& r : runs) {
    for (const auto& [mode, m] : r.metrics) {
      out << to_string(r.method) << ',' << r.alpha << ',' << r.seed << ',' << to_string(mode) << ',' << m.accuracy
          << ',' << m.ce_loss << ',' << m.ece << ',' << m.mean_entropy << ',' << m.mean_confidence << '\n';
    }
  }
}

void write_runs_csv(std::span<const RunRecord> runs, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,alpha,seed,mode,accuracy,ce_loss,ece,mean_entropy,mean_confidence,erm_modified,r1,r2,r3,r4,total\n";
  for (const auto& r : runs) {
    const auto& b = r.breakdown;
    for (const auto& [mode, m] : r.metrics) {
      out << to_string(r.method) << ',' << r.alpha << ',' << r.seed << ',' << to_string(mode) << ',' << m.accuracy
          << ',' << m.ce_loss << ',' << m.ece << ',' << m.mean_entropy << ',' << m.mean_confidence << ','
          << b.erm_modified << ',' << b.r1 << ',' << b.r2 << ',' << b.r3 << ',' << b.r4 << ',' << b.total << '\n';
    }
  }
}

void write_summary_csv(std::span<const RunRecord> runs, const std::filesystem::path& path) {
  // Cells keep first-seen order so the output follows the sweep layout.
  std::vector<std::tuple<std::string, double, std::string>> order;
  std::map<std::tuple<std::string, double, std::string>, std::vector<std::vector<double>>> cells;
  for (const auto& r : runs) {
    for (const auto& [mode, m] : r.metrics) {
      const auto key = std::make_tuple(std::string(to_string(r.method)), r.alpha, std::string(to_string(mode)));
      auto [it, fresh] = cells.try_emplace(key);
      if (fresh) {
        order.push_back(key);
        it->second.resize(std::size(kMetricNames));
      }
      const auto vals = metric_values(m);
      for (std::size_t k = 0; k < vals.size(); ++k) it->second[k].push_back(vals[k]);
    }
  }
  auto out = open_csv(path);
  out << "method,alpha,mode,repetitions";
  for (const char* name : kMetricNames) out << ',' << name << "_mean," << name << "_ci95";
  out << '\n';
  for (const auto& key : order) {
    const auto& cols = cells.at(key);
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << cols.front().size();
    for (const auto& col : cols) {
      const Interval iv = t_interval(col);
      out << ',' << iv.mean << ',';
      if (iv.has_ci()) out << iv.half_width;
      else out << "n/a";
    }
    out << '\n';
  }
}

void write_histogram_csv(const MetricsRow& row, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "bin_left,bin_right,count\n";
  const auto bins = row.confidence_histogram.size();
  for (std::size_t b = 0; b < bins; ++b) {
    out << static_cast<double>(b) / static_cast<double>(bins) << ','
        << static_cast<double>(b + 1) / static_cast<double>(bins) << ',' << row.confidence_histogram[b] << '\n';
  }
}

void write_breakdown_csv(std::span<const RegularizerBreakdown> rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "erm_modified,r1,r2,r3,r4,total\n";
  for (const auto& b : rows) {
    out << b.erm_modified << ',' << b.r1 << ',' << b.r2 << ',' << b.r3 << ',' << b.r4 << ',' << b.total << '\n';
  }
}

}  // namespace mixreg

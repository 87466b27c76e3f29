#include "mixreg/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "mixreg/random.hpp"

namespace mixreg {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_input(const Model& model, const Vec& x) {
  if (x.size() != input_dim(model)) {
    throw std::invalid_argument("model expects " + std::to_string(input_dim(model)) +
                                " inputs, got " + std::to_string(x.size()));
  }
}

Vec flatten_row_major(const Mat& m) {
  Vec out(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(k++) = m(r, c);
  return out;
}

Mat unflatten_row_major(const double* data, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  return m;
}

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_json_array(const nlohmann::json& j, Eigen::Index expected, const char* field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected) {
    throw std::runtime_error(std::string("model JSON: field '") + field + "' has the wrong size");
  }
  Vec v(expected);
  for (Eigen::Index k = 0; k < expected; ++k) v(k) = j[static_cast<std::size_t>(k)].get<double>();
  return v;
}

// Row-wise s_m^T sigma s_m for every frequency row.
Vec frequency_quadratic_forms(const RffModel& m, const Mat& sigma) {
  return ((m.frequencies * sigma).array() * m.frequencies.array()).rowwise().sum().matrix();
}

}  // namespace

int input_dim(const Model& model) {
  return std::visit(overloaded{[](const LinearModel& m) { return static_cast<int>(m.weights.cols()); },
                               [](const RffModel& m) { return static_cast<int>(m.frequencies.cols()); }},
                    model);
}

int output_dim(const Model& model) {
  return std::visit(overloaded{[](const LinearModel& m) { return static_cast<int>(m.weights.rows()); },
                               [](const RffModel& m) { return static_cast<int>(m.head.rows()); }},
                    model);
}

LinearModel init_linear(int d, int c) {
  if (d < 1 || c < 1) throw std::domain_error("linear model needs d, c >= 1");
  return LinearModel{Mat::Zero(c, d), Vec::Zero(c)};
}

RffModel init_rff(int d, int m, double sigma_rff, int c, std::uint64_t seed) {
  if (m < 1) throw std::domain_error("RFF model needs at least one feature");
  if (!(sigma_rff > 0.0)) throw std::domain_error("RFF frequency scale must be positive");
  if (d < 1 || c < 1) throw std::domain_error("RFF model needs d, c >= 1");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma_rff);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  RffModel model;
  model.frequencies.resize(m, d);
  for (int r = 0; r < m; ++r)
    for (int k = 0; k < d; ++k) model.frequencies(r, k) = gauss(rng);
  model.phases.resize(m);
  for (int r = 0; r < m; ++r) {
    double b = phase(rng);
    // uniform_real_distribution may round up to its upper bound
    while (b >= 2.0 * std::numbers::pi) b = phase(rng);
    model.phases(r) = b;
  }
  model.head = Mat::Zero(c, m);
  return model;
}

PointFeatures features(const Model& model, const Vec& x) {
  require_input(model, x);
  return std::visit(
      overloaded{[&](const LinearModel& m) {
                   return PointFeatures{x, Mat::Identity(m.weights.cols(), m.weights.cols())};
                 },
                 [&](const RffModel& m) {
                   const double scale = 1.0 / std::sqrt(static_cast<double>(m.features()));
                   const Vec arg = m.frequencies * x + m.phases;
                   PointFeatures pf;
                   pf.phi = scale * arg.array().cos().matrix();
                   pf.dphi = (-scale * arg.array().sin()).matrix().asDiagonal() * m.frequencies;
                   return pf;
                 }},
      model);
}

Vec predict(const Model& model, const PointFeatures& pf) {
  return std::visit(overloaded{[&](const LinearModel& m) -> Vec { return m.weights * pf.phi + m.bias; },
                               [&](const RffModel& m) -> Vec { return m.head * pf.phi; }},
                    model);
}

Vec predict(const Model& model, const Vec& x) {
  require_input(model, x);
  return std::visit(
      overloaded{[&](const LinearModel& m) -> Vec { return m.weights * x + m.bias; },
                 [&](const RffModel& m) -> Vec {
                   const double scale = 1.0 / std::sqrt(static_cast<double>(m.features()));
                   const Vec phi = scale * (m.frequencies * x + m.phases).array().cos().matrix();
                   return m.head * phi;
                 }},
      model);
}

Mat input_jacobian(const Model& model, const PointFeatures& pf) {
  return std::visit(overloaded{[&](const LinearModel& m) -> Mat { return m.weights; },
                               [&](const RffModel& m) -> Mat { return m.head * pf.dphi; }},
                    model);
}

Mat input_jacobian(const Model& model, const Vec& x) { return input_jacobian(model, features(model, x)); }

InputHessian input_hessian(const Model& model, const Vec& x) {
  require_input(model, x);
  return std::visit(
      overloaded{[&](const LinearModel& m) {
                   const auto d = m.weights.cols();
                   return InputHessian{std::vector<Mat>(static_cast<std::size_t>(m.weights.rows()),
                                                        Mat::Zero(d, d))};
                 },
                 [&](const RffModel& m) {
                   // hessian_k = -S^T diag(w_k .* phi) S since d^2 phi_m = -phi_m s_m s_m^T
                   const PointFeatures pf = features(model, x);
                   InputHessian h;
                   for (Eigen::Index k = 0; k < m.head.rows(); ++k) {
                     const Vec weights = m.head.row(k).transpose().cwiseProduct(pf.phi);
                     h.slices.push_back(-m.frequencies.transpose() * weights.asDiagonal() *
                                        m.frequencies);
                   }
                   return h;
                 }},
      model);
}

double hessian_contraction(const InputHessian& hessian, const Vec& g, const Mat& sigma) {
  double total = 0.0;
  for (std::size_t k = 0; k < hessian.slices.size(); ++k) {
    total += g(static_cast<Eigen::Index>(k)) * frobenius(sigma, hessian.slices[k]);
  }
  return total;
}

Vec hessian_traces(const Model& model, const PointFeatures& pf, const Mat& sigma) {
  return std::visit(overloaded{[&](const LinearModel& m) -> Vec { return Vec::Zero(m.weights.rows()); },
                               [&](const RffModel& m) -> Vec {
                                 const Vec q = frequency_quadratic_forms(m, sigma);
                                 return -(m.head * pf.phi.cwiseProduct(q));
                               }},
                    model);
}

double hessian_contraction(const Model& model, const PointFeatures& pf, const Vec& g,
                           const Mat& sigma) {
  return g.dot(hessian_traces(model, pf, sigma));
}

std::size_t parameter_count(const Model& model) {
  return std::visit(
      overloaded{[](const LinearModel& m) { return static_cast<std::size_t>(m.weights.size() + m.bias.size()); },
                 [](const RffModel& m) { return static_cast<std::size_t>(m.head.size()); }},
      model);
}

Vec parameters(const Model& model) {
  return std::visit(overloaded{[](const LinearModel& m) -> Vec {
                                 Vec p(m.weights.size() + m.bias.size());
                                 p << flatten_row_major(m.weights), m.bias;
                                 return p;
                               },
                               [](const RffModel& m) -> Vec { return flatten_row_major(m.head); }},
                    model);
}

void set_parameters(Model& model, const Vec& params) {
  if (static_cast<std::size_t>(params.size()) != parameter_count(model)) {
    throw std::invalid_argument("set_parameters: wrong parameter count");
  }
  std::visit(overloaded{[&](LinearModel& m) {
                          const auto c = m.weights.rows();
                          const auto d = m.weights.cols();
                          m.weights = unflatten_row_major(params.data(), c, d);
                          m.bias = params.segment(c * d, c);
                        },
                        [&](RffModel& m) {
                          m.head = unflatten_row_major(params.data(), m.head.rows(), m.head.cols());
                        }},
             model);
}

Vec pullback(const Model& model, const PointFeatures& pf, const Vec& du, const Mat& d_jacobian) {
  return std::visit(overloaded{[&](const LinearModel&) -> Vec {
                                 const Mat dw = du * pf.phi.transpose() + d_jacobian;
                                 Vec g(dw.size() + du.size());
                                 g << flatten_row_major(dw), du;
                                 return g;
                               },
                               [&](const RffModel&) -> Vec {
                                 return flatten_row_major(du * pf.phi.transpose() +
                                                          d_jacobian * pf.dphi.transpose());
                               }},
                    model);
}

Vec hessian_contraction_gradient(const Model& model, const PointFeatures& pf, const Vec& g,
                                 const Mat& sigma) {
  return std::visit(overloaded{[&](const LinearModel&) -> Vec { return Vec::Zero(parameter_count(model)); },
                               [&](const RffModel& m) -> Vec {
                                 const Vec q = frequency_quadratic_forms(m, sigma);
                                 const Vec a = -pf.phi.cwiseProduct(q);
                                 return flatten_row_major(g * a.transpose());
                               }},
                    model);
}

Vec param_gradient(const Model& model, LossKind kind, const Vec& x, const Vec& y) {
  const PointFeatures pf = features(model, x);
  const Vec u = predict(model, pf);
  const LossBundle b = bundle(kind, y, u);
  return pullback(model, pf, b.grad_u, Mat::Zero(u.size(), x.size()));
}

nlohmann::json model_to_json(const Model& model) {
  return std::visit(overloaded{[](const LinearModel& m) {
                                 return nlohmann::json{{"kind", "linear"},
                                                       {"input_dim", m.weights.cols()},
                                                       {"output_dim", m.weights.rows()},
                                                       {"weights", to_vector(flatten_row_major(m.weights))},
                                                       {"bias", to_vector(m.bias)}};
                               },
                               [](const RffModel& m) {
                                 return nlohmann::json{{"kind", "rff"},
                                                       {"input_dim", m.frequencies.cols()},
                                                       {"output_dim", m.head.rows()},
                                                       {"features", m.frequencies.rows()},
                                                       {"frequencies", to_vector(flatten_row_major(m.frequencies))},
                                                       {"phases", to_vector(m.phases)},
                                                       {"head", to_vector(flatten_row_major(m.head))}};
                               }},
                    model);
}

Model model_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const auto d = j.at("input_dim").get<Eigen::Index>();
  const auto c = j.at("output_dim").get<Eigen::Index>();
  if (d < 1 || c < 1) throw std::runtime_error("model JSON: dimensions must be positive");
  if (kind == "linear") {
    const Vec w = from_json_array(j.at("weights"), c * d, "weights");
    return LinearModel{unflatten_row_major(w.data(), c, d), from_json_array(j.at("bias"), c, "bias")};
  }
  if (kind == "rff") {
    const auto m = j.at("features").get<Eigen::Index>();
    if (m < 1) throw std::runtime_error("model JSON: features must be positive");
    const Vec s = from_json_array(j.at("frequencies"), m * d, "frequencies");
    const Vec w = from_json_array(j.at("head"), c * m, "head");
    return RffModel{unflatten_row_major(s.data(), m, d), from_json_array(j.at("phases"), m, "phases"),
                    unflatten_row_major(w.data(), c, m)};
  }
  throw std::runtime_error("model JSON: unknown kind '" + kind + "'");
}

}  // namespace mixreg

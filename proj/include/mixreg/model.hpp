#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mixreg/linalg.hpp"
#include "mixreg/loss.hpp"

namespace mixreg {

/// f(x) = W x + b.
struct LinearModel {
  Mat weights;  // c x d
  Vec bias;     // c
};

/// f(x) = w phi(x) with phi(x) = cos(S x + B) / sqrt(M). S and B are frozen;
/// only the head w is trained.
struct RffModel {
  Mat frequencies;  // M x d
  Vec phases;       // M
  Mat head;         // c x M

  int features() const { return static_cast<int>(frequencies.rows()); }
};

using Model = std::variant<LinearModel, RffModel>;

/// Input Hessian of a vector-valued model: one d x d slice per output.
struct InputHessian {
  std::vector<Mat> slices;
};

/// Per-point quantities that do not depend on trainable parameters. For the
/// linear model phi = x and dphi = I; for RFF phi is the feature vector and
/// dphi its M x d Jacobian. Then f = A phi (+ b) and grad f = A dphi.
struct PointFeatures {
  Vec phi;
  Mat dphi;
};

int input_dim(const Model& model);
int output_dim(const Model& model);

LinearModel init_linear(int d, int c);
RffModel init_rff(int d, int m, double sigma_rff, int c, std::uint64_t seed);

PointFeatures features(const Model& model, const Vec& x);

Vec predict(const Model& model, const Vec& x);
Vec predict(const Model& model, const PointFeatures& pf);
/// c x d Jacobian of f at x.
Mat input_jacobian(const Model& model, const Vec& x);
Mat input_jacobian(const Model& model, const PointFeatures& pf);
InputHessian input_hessian(const Model& model, const Vec& x);

/// sum_k g_k <sigma, hessian_k>.
double hessian_contraction(const InputHessian& hessian, const Vec& g, const Mat& sigma);
/// Same contraction evaluated straight from cached features (no dense tensor).
double hessian_contraction(const Model& model, const PointFeatures& pf, const Vec& g,
                           const Mat& sigma);
/// Per-output t_k = <sigma, hessian_k>.
Vec hessian_traces(const Model& model, const PointFeatures& pf, const Mat& sigma);

std::size_t parameter_count(const Model& model);
/// Trainable parameters flattened row-major: W then b (linear), w (RFF).
Vec parameters(const Model& model);
void set_parameters(Model& model, const Vec& params);

/// Gradient of l(y, f(x)) with respect to the trainable parameters.
Vec param_gradient(const Model& model, LossKind kind, const Vec& x, const Vec& y);

/// Parameter gradient of a scalar F(u, G) with u = f(x), G = grad f(x),
/// given dF/du (c) and dF/dG (c x d).
Vec pullback(const Model& model, const PointFeatures& pf, const Vec& du, const Mat& d_jacobian);

/// Parameter gradient of sum_k g_k <sigma, hessian_k(x)> with g held fixed.
Vec hessian_contraction_gradient(const Model& model, const PointFeatures& pf, const Vec& g,
                                 const Mat& sigma);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

}  // namespace mixreg

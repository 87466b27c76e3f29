#include "mixreg/regularization.hpp"

#include <numeric>
#include <stdexcept>

#include "mixreg/fault.hpp"
#include "mixreg/linalg.hpp"

namespace mixreg {
namespace {

void require_index(const Dataset& ds, std::size_t i) {
  if (i >= ds.size()) throw std::out_of_range("example index out of range");
}

struct PointState {
  Vec x_mod;
  Vec y_mod;
  PointFeatures pf;
  Vec u;
  LossBundle loss;
  Mat jac;
};

PointState evaluate_point(const RegularizationContext& ctx, const Model& model, LossKind kind,
                          std::size_t i) {
  PointState s;
  s.x_mod = ctx.modified().data.input(i);
  s.y_mod = ctx.modified().data.output(i);
  s.pf = features(model, s.x_mod);
  s.u = predict(model, s.pf);
  s.loss = bundle(kind, s.y_mod, s.u);
  s.jac = input_jacobian(model, s.pf);
  return s;
}

RegularizerBreakdown assemble(const std::vector<ExampleTerms>& terms) {
  RegularizerBreakdown b;
  for (const auto& t : terms) {
    b.erm_modified += t.erm;
    b.r1 += t.r1;
    b.r2 += t.r2;
    b.r3 += t.r3;
    b.r4 += t.r4;
    b.truncated_covariances += t.covariance_truncated ? 1 : 0;
    b.truncated_hessians += t.hessian_truncated ? 1 : 0;
  }
  const double n = static_cast<double>(terms.size());
  b.erm_modified /= n;
  b.r1 /= n;
  b.r2 /= n;
  b.r3 /= n;
  b.r4 /= n;
  if (fault::active() == fault::Mutation::FlipR3Sign) b.r3 = -b.r3;
  b.total = b.erm_modified + b.r1 + b.r2 + b.r3 + b.r4;
  return b;
}

template <class PerExample>
RegularizerBreakdown collect(const RegularizationContext& ctx, PerExample&& per_example) {
  std::vector<ExampleTerms> terms;
  terms.reserve(ctx.size());
  for (std::size_t i = 0; i < ctx.size(); ++i) terms.push_back(per_example(i));
  return assemble(terms);
}

void require_loss_shape(const RegularizationContext& ctx, const Model& model, LossKind kind) {
  if (output_dim(model) != ctx.original().output_dim()) {
    throw std::invalid_argument("model output size does not match the dataset");
  }
  if (kind == LossKind::Logistic && output_dim(model) != 1) {
    throw std::invalid_argument("logistic regularizers need a scalar model");
  }
}

}  // namespace

PerExampleCovariances per_example_covariances(const Dataset& ds, const MixCoefficients& coeffs,
                                              std::size_t i) {
  require_index(ds, i);
  const Vec dx = ds.input(i) - ds.x_mean();
  const Vec dy = ds.output(i) - ds.y_mean();
  const auto mutation = fault::active();
  const double s2 = mutation == fault::Mutation::DropSigmaSq ? 0.0 : coeffs.sigma_sq;
  const double g2 = mutation == fault::Mutation::DropGammaSq ? 0.0 : coeffs.gamma_sq;
  const DatasetStats& st = ds.stats();
  return PerExampleCovariances{s2 * dx * dx.transpose() + g2 * st.sxx,
                               s2 * dy * dy.transpose() + g2 * st.syy,
                               s2 * dx * dy.transpose() + g2 * st.sxy};
}

PerExampleCovariances exact_second_moments(const Dataset& ds, const MixCoefficients& coeffs,
                                           std::size_t i) {
  require_index(ds, i);
  const double m1 = trunc_beta_raw_moment(coeffs.alpha, 1);
  const double m2 = trunc_beta_raw_moment(coeffs.alpha, 2);
  const double tb = coeffs.theta_bar;
  const Vec xi = ds.input(i);
  const Vec yi = ds.output(i);
  const auto d = ds.input_dim();
  const auto c = ds.output_dim();
  PerExampleCovariances out{Mat::Zero(d, d), Mat::Zero(c, c), Mat::Zero(d, c)};
  // delta = theta * a + b with a = x_i - x_j and b = x_j - tb x_i - (1 - tb) xbar
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const Vec xj = ds.input(j);
    const Vec yj = ds.output(j);
    const Vec ax = xi - xj;
    const Vec bx = xj - tb * xi - (1.0 - tb) * ds.x_mean();
    const Vec ay = yi - yj;
    const Vec by = yj - tb * yi - (1.0 - tb) * ds.y_mean();
    out.sxx += m2 * ax * ax.transpose() + m1 * (ax * bx.transpose() + bx * ax.transpose()) + bx * bx.transpose();
    out.syy += m2 * ay * ay.transpose() + m1 * (ay * by.transpose() + by * ay.transpose()) + by * by.transpose();
    out.sxy += m2 * ax * ay.transpose() + m1 * (ax * by.transpose() + bx * ay.transpose()) + bx * by.transpose();
  }
  const double n = static_cast<double>(ds.size());
  out.sxx /= n;
  out.syy /= n;
  out.sxy /= n;
  return out;
}

double quadratic_loss(const ModifiedDataset& mod, const Model& model, LossKind kind, std::size_t i,
                      const Vec& delta, const Vec& epsilon) {
  require_index(mod.data, i);
  const Vec x = mod.data.input(i);
  const Vec y = mod.data.output(i);
  const PointFeatures pf = features(model, x);
  const LossBundle b = bundle(kind, y, predict(model, pf));
  const Mat g = input_jacobian(model, pf);
  const Vec gd = g * delta;
  const InputHessian hess = input_hessian(model, x);
  double curvature = 0.0;
  for (std::size_t k = 0; k < hess.slices.size(); ++k) {
    curvature += b.grad_u(static_cast<Eigen::Index>(k)) * delta.dot(hess.slices[k] * delta);
  }
  return b.value + b.grad_y.dot(epsilon) + b.grad_u.dot(gd) + 0.5 * (gd.dot(b.hess_uu * gd) + curvature) +
         0.5 * epsilon.dot(b.hess_yy * epsilon) + epsilon.dot(b.hess_yu * gd);
}

RegularizationContext::RegularizationContext(const Dataset& ds, const MixCoefficients& coeffs)
    : original_(ds), modified_(modify(ds, coeffs.theta_bar)), coeffs_(coeffs) {
  covariances_.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    covariances_.push_back(per_example_covariances(ds, coeffs, i));
    const SymmetricSpectrum spec(covariances_.back().sxx);
    sxx_pinv_.push_back(spec.pseudo_inverse());
    sxx_truncated_.push_back(spec.truncated() ? 1 : 0);
  }
}

ExampleTerms example_terms_general(const RegularizationContext& ctx, const Model& model, LossKind kind,
                                   std::size_t i) {
  const PointState s = evaluate_point(ctx, model, kind, i);
  const PerExampleCovariances& cov = ctx.covariances(i);
  const Mat& sxx_pinv = ctx.sxx_pinv(i);
  const SymmetricSpectrum h(s.loss.hess_uu);
  const Mat h_pinv = h.pseudo_inverse();
  const Mat h_sqrt = h.sqrt();
  const Mat h_isqrt = h.inverse_sqrt();
  const Mat b_yu = s.loss.hess_yu;
  const Mat b_uy = b_yu.transpose();
  const Mat syx = cov.sxy.transpose();

  const Mat jt = -h_pinv * b_uy * syx * sxx_pinv;
  const Mat m1 = (s.jac - jt).transpose() * h_sqrt;
  const Mat m3 = cov.sxy * b_yu * h_isqrt;

  ExampleTerms t;
  t.erm = s.loss.value;
  t.r1 = 0.5 * frobenius(m1, cov.sxx * m1);
  t.r2 = 0.5 * hessian_contraction(input_hessian(model, s.x_mod), s.loss.grad_u, cov.sxx);
  t.r3 = -0.5 * frobenius(m3, sxx_pinv * m3);
  t.r4 = 0.5 * frobenius(cov.syy, s.loss.hess_yy);
  t.covariance_truncated = ctx.sxx_truncated(i);
  t.hessian_truncated = h.truncated();
  return t;
}

RegularizerBreakdown r_terms_general(const RegularizationContext& ctx, const Model& model, LossKind kind) {
  require_loss_shape(ctx, model, kind);
  return collect(ctx, [&](std::size_t i) { return example_terms_general(ctx, model, kind, i); });
}

RegularizerBreakdown r_terms_general(const Dataset& ds, const Model& model, LossKind kind,
                                     const MixCoefficients& coeffs) {
  return r_terms_general(RegularizationContext(ds, coeffs), model, kind);
}

RegularizerBreakdown r_terms_ce(const RegularizationContext& ctx, const Model& model) {
  require_loss_shape(ctx, model, LossKind::CrossEntropy);
  return collect(ctx, [&](std::size_t i) {
    const Vec x = ctx.modified().data.input(i);
    const Vec y = ctx.modified().data.output(i);
    const PointFeatures pf = features(model, x);
    const Vec u = predict(model, pf);
    const Vec p = softmax(u);
    const Mat hu = softmax_hessian(u);
    const SymmetricSpectrum spec(hu);
    const Mat h_pinv = spec.pseudo_inverse();
    const PerExampleCovariances& cov = ctx.covariances(i);
    const Mat syx = cov.sxy.transpose();
    const Mat& sp = ctx.sxx_pinv(i);
    const Mat j = h_pinv * syx * sp;
    const Mat diff = input_jacobian(model, pf) - j;
    ExampleTerms t;
    t.erm = log_sum_exp(u) - y.dot(u);
    t.r1 = 0.5 * (diff * cov.sxx * diff.transpose() * hu).trace();
    t.r2 = 0.5 * (p - y).dot(hessian_traces(model, pf, cov.sxx));
    t.r3 = -0.5 * (h_pinv * syx * sp * cov.sxy).trace();
    t.r4 = 0.0;
    t.covariance_truncated = ctx.sxx_truncated(i);
    t.hessian_truncated = spec.truncated();
    return t;
  });
}

RegularizerBreakdown r_terms_lr(const RegularizationContext& ctx, const Model& model) {
  require_loss_shape(ctx, model, LossKind::Logistic);
  return collect(ctx, [&](std::size_t i) {
    const Vec x = ctx.modified().data.input(i);
    const double y = ctx.modified().data.outputs()(static_cast<Eigen::Index>(i), 0);
    const PointFeatures pf = features(model, x);
    const double u = predict(model, pf)(0);
    const double s = sigmoid(u);
    const double v = s * (1.0 - s);
    const PerExampleCovariances& cov = ctx.covariances(i);
    const Vec syx = cov.sxy.col(0);
    const Mat& sp = ctx.sxx_pinv(i);
    const Vec grad = input_jacobian(model, pf).row(0).transpose();
    const Vec diff = grad - sp * syx / v;
    ExampleTerms t;
    t.erm = loss_value(LossKind::Logistic, Vec::Constant(1, y), Vec::Constant(1, u));
    t.r1 = 0.5 * v * diff.dot(cov.sxx * diff);
    t.r2 = 0.5 * (s - y) * hessian_traces(model, pf, cov.sxx)(0);
    t.r3 = -0.5 * syx.dot(sp * syx) / v;
    t.r4 = 0.0;
    t.covariance_truncated = ctx.sxx_truncated(i);
    t.hessian_truncated = !(v > 0.0);
    return t;
  });
}

RegularizerBreakdown r_terms_se(const RegularizationContext& ctx, const Model& model) {
  require_loss_shape(ctx, model, LossKind::SquaredError);
  return collect(ctx, [&](std::size_t i) {
    const Vec x = ctx.modified().data.input(i);
    const Vec y = ctx.modified().data.output(i);
    const PointFeatures pf = features(model, x);
    const Vec u = predict(model, pf);
    const PerExampleCovariances& cov = ctx.covariances(i);
    const Mat j = cov.sxy.transpose() * ctx.sxx_pinv(i);
    const Mat diff = input_jacobian(model, pf) - j;
    ExampleTerms t;
    t.erm = 0.5 * (u - y).squaredNorm();
    t.r1 = 0.5 * (diff * cov.sxx * diff.transpose()).trace();
    t.r2 = 0.5 * (u - y).dot(hessian_traces(model, pf, cov.sxx));
    t.r3 = -0.5 * (cov.sxy.transpose() * ctx.sxx_pinv(i) * cov.sxy).trace();
    t.r4 = 0.5 * cov.syy.trace();
    t.covariance_truncated = ctx.sxx_truncated(i);
    return t;
  });
}

double approx_mixup_objective(const RegularizationContext& ctx, const Model& model, LossKind kind,
                              bool drop_r2) {
  const RegularizerBreakdown b = r_terms_general(ctx, model, kind);
  return drop_r2 ? b.total - b.r2 : b.total;
}

double approx_mixup_objective(const Dataset& ds, const Model& model, LossKind kind,
                              const MixCoefficients& coeffs, bool drop_r2) {
  return approx_mixup_objective(RegularizationContext(ds, coeffs), model, kind, drop_r2);
}

double approx_objective_rows(const RegularizationContext& ctx, const Model& model, LossKind kind,
                             bool drop_r2, std::span<const std::size_t> rows, Vec* gradient) {
  require_loss_shape(ctx, model, kind);
  if (rows.empty()) throw std::invalid_argument("objective needs at least one row");
  double value = 0.0;
  if (gradient) *gradient = Vec::Zero(static_cast<Eigen::Index>(parameter_count(model)));
  const bool flip = fault::active() == fault::Mutation::FlipR3Sign;
  for (const std::size_t i : rows) {
    if (i >= ctx.size()) throw std::out_of_range("row index out of range");
    const PointState s = evaluate_point(ctx, model, kind, i);
    const PerExampleCovariances& cov = ctx.covariances(i);
    const Mat& h = s.loss.hess_uu;
    const Mat& b_yu = s.loss.hess_yu;
    const Mat syx = cov.sxy.transpose();
    const Mat gsg = s.jac * cov.sxx * s.jac.transpose();
    double v = s.loss.value + 0.5 * frobenius(h, gsg) + frobenius(syx, b_yu * s.jac) +
               0.5 * frobenius(cov.syy, s.loss.hess_yy);
    Vec traces;
    if (!drop_r2) {
      traces = hessian_traces(model, s.pf, cov.sxx);
      v += 0.5 * s.loss.grad_u.dot(traces);
    }
    if (flip) {
      // Completed square hides R3; recover it explicitly so the mutation shows.
      const SymmetricSpectrum hs(h);
      const Mat m3 = cov.sxy * b_yu * hs.inverse_sqrt();
      v += frobenius(m3, ctx.sxx_pinv(i) * m3);
    }
    value += v;
    if (gradient) {
      Vec du = s.loss.grad_u + 0.5 * hess_uu_directional(kind, s.u, gsg);
      const Mat dg = h * s.jac * cov.sxx + b_yu.transpose() * syx;
      if (!drop_r2) du += 0.5 * h * traces;
      Vec g = pullback(model, s.pf, du, dg);
      if (!drop_r2) g += 0.5 * hessian_contraction_gradient(model, s.pf, s.loss.grad_u, cov.sxx);
      *gradient += g;
    }
  }
  const double n = static_cast<double>(rows.size());
  if (gradient) *gradient /= n;
  return value / n;
}

}  // namespace mixreg

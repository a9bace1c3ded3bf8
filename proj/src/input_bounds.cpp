#include "cmpc/input_bounds.hpp"

#include <cmath>

#include "cmpc/numerics.hpp"

namespace cmpc {

namespace {

double inverse_gain(const SystemModel& sys, const Vec& xbar) {
  double gx = sys.g(xbar);
  if (std::abs(gx) < sys.g_min)
    throw NumericalError("input gain g(xbar) below the singularity guard");
  return 1.0 / std::abs(gx);
}

}  // namespace

Vec InputBoundParams::n_term(const Vec& xbar) const {
  double ginv = inverse_gain(sys, xbar);
  double e = law.ebar;
  Vec n(2);
  n(0) = 2.0 * alpha * beta * e + alpha * ginv + beta * law.k_norm * e;
  n(1) = ginv + beta * e;
  return n;
}

double InputBoundParams::gamma_term(const Vec& xbar) const {
  double ginv = inverse_gain(sys, xbar);
  double e = law.ebar;
  return e * (beta * e + ginv) * (alpha + law.k_norm);
}

InputBoundParams make_params(double alpha, double beta, double u_max,
                             const TrackingLaw& law, const SystemModel& sys) {
  if (alpha < 0.0 || beta < 0.0)
    throw InvalidInputError("alpha and beta must be nonnegative");
  if (u_max <= 0.0) throw InvalidInputError("u_max must be positive");

  InputBoundParams params;
  params.alpha = alpha;
  params.beta = beta;
  params.u_max = u_max;
  Eigen::Matrix2d raw;
  raw << 2.0 * alpha * beta, beta, beta, 0.0;
  params.m = psd_project_2x2(raw).matrix;
  params.law = law;
  params.sys = sys;
  return params;
}

Vec sigma_profile(const SystemModel& sys, const BezierSpline& ref,
                  const Vec& xbar, double t) {
  if (xbar.size() != ref.n) throw InvalidInputError("anchor dimension mismatch");
  Vec sig(2);
  sig(0) = (ref.state(t) - xbar).norm();
  sig(1) = std::abs(ref.derivative(t, ref.n) - sys.f(xbar));
  return sig;
}

double fbl_bound_rhs(const InputBoundParams& params, const Vec& xbar,
                     const Vec& sigma) {
  if (sigma.size() != 2) throw InvalidInputError("sigma must be a 2-vector");
  if (sigma.minCoeff() < 0.0)
    throw InvalidInputError("sigma components must be nonnegative");
  return 0.5 * sigma.dot(params.m * sigma) + params.n_term(xbar).dot(sigma) +
         params.gamma_term(xbar);
}

SocBlock::Interval SocBlock::sigma_interval(const Vec& s) const {
  if (s.size() != 2) throw InvalidInputError("s must be a 2-vector");
  Interval iv;
  iv.lo = (l.transpose() * s).squaredNorm() - 0.25;
  iv.hi = u_max - n.dot(s) - gamma - 0.25;
  return iv;
}

bool SocBlock::feasible(const Vec& s) const {
  if (s.minCoeff() < 0.0) return false;
  Interval iv = sigma_interval(s);
  return iv.lo <= iv.hi;
}

SocBlock soc_reformulate(const InputBoundParams& params, const Vec& xbar) {
  SocBlock block;
  block.l = psd_sqrt_factor_2x2(0.5 * params.m);
  block.n = params.n_term(xbar);
  block.gamma = params.gamma_term(xbar);
  block.u_max = params.u_max;
  return block;
}

}  // namespace cmpc

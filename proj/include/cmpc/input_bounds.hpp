#pragma once

#include "cmpc/bezier.hpp"
#include "cmpc/dynamics.hpp"
#include "cmpc/tracking.hpp"
#include "cmpc/types.hpp"

namespace cmpc {

// Quadratic overapproximation of the tracking input around a segment anchor:
//   |u_track| <= 1/2 sigma^T M sigma + N(xbar)^T sigma + Gamma(xbar)
// where sigma measures how far the reference strays from the anchor. The
// knobs alpha and beta absorb the model's Lipschitz constants; they are
// config inputs, tuned up from (1, 1) until the closed-loop input stays in
// bounds.
struct InputBoundParams {
  double alpha = 0.0;
  double beta = 0.0;
  double u_max = 0.0;
  Mat m;  // 2x2 PSD, rank <= 1 by construction
  TrackingLaw law;
  SystemModel sys;

  Vec n_term(const Vec& xbar) const;
  double gamma_term(const Vec& xbar) const;
};

InputBoundParams make_params(double alpha, double beta, double u_max,
                             const TrackingLaw& law, const SystemModel& sys);

// deviation profile at time t: distance of the reference from the anchor and
// of its top derivative from the anchor drift
Vec sigma_profile(const SystemModel& sys, const BezierSpline& ref,
                  const Vec& xbar, double t);

double fbl_bound_rhs(const InputBoundParams& params, const Vec& xbar,
                     const Vec& sigma);

// Conic encoding of 1/2 s^T M s + N^T s + Gamma <= u_max over s >= 0:
//   ||(L^T s, sigma)|| <= sigma + 1/2,   sigma + 1/4 <= u_max - N^T s - Gamma
// with L L^T = M / 2 and sigma a fresh scalar variable. The s satisfying the
// two rows for some sigma are exactly the quadratic-feasible ones.
struct SocBlock {
  Mat l;  // 2 x rank
  Vec n;
  double gamma = 0.0;
  double u_max = 0.0;

  struct Interval {
    double lo;
    double hi;
  };
  // admissible sigma range for a fixed s; empty iff lo > hi
  Interval sigma_interval(const Vec& s) const;
  bool feasible(const Vec& s) const;
};

SocBlock soc_reformulate(const InputBoundParams& params, const Vec& xbar);

}  // namespace cmpc

#pragma once

#include <vector>

#include "cmpc/bezier.hpp"
#include "cmpc/dynamics.hpp"
#include "cmpc/types.hpp"

namespace cmpc {

// Error-feedback design for the integrator chain: K places the poles of the
// companion error matrix F, P certifies decay through F^T P + P F = -Q, and
// the derived constants size the disturbance tube
//   gamma = 4 lmax(P)^3 / lmin(Q)^2,   ebar = sqrt(gamma wbar^2 / lmin(P)).
struct TrackingLaw {
  Vec k;  // error gain, lowest derivative first
  Mat f;
  Mat p;
  Mat q;
  double lambda_min_q = 0.0;
  double lambda_min_p = 0.0;
  double lambda_max_p = 0.0;
  double gamma = 0.0;
  double wbar = 0.0;
  double ebar = 0.0;
  double k_norm = 0.0;

  // sublevel set V <= gamma wbar^2 is invariant under the tracking laws
  double tube_level() const { return gamma * wbar * wbar; }
};

TrackingLaw design_tracking_law(int n, const std::vector<double>& poles,
                                const Mat& q, double wbar);

Vec tracking_error(const BezierSpline& ref, const Vec& x, double t);

double lyapunov_value(const TrackingLaw& law, const BezierSpline& ref,
                      const Vec& x, double t);

// boundary states count as inside; tolerance scales with the level
bool in_tube(const TrackingLaw& law, const BezierSpline& ref, const Vec& x,
             double t);

// Exact feedback-linearizing tracker: cancels the drift mismatch and applies
// the error gain.
double k_fbl(const SystemModel& sys, const TrackingLaw& law,
             const BezierSpline& ref, const Vec& x, double t);

// Feedforward alone: matches the reference's top derivative along the curve.
double k_ff(const SystemModel& sys, const BezierSpline& ref, const Vec& x,
            double t);

// Pointwise min-norm filter: stays at the feedforward whenever the decay
// condition allows it, otherwise moves to the constraint boundary. Closed
// form of a one-dimensional QP.
double k_clf(const SystemModel& sys, const TrackingLaw& law,
             const BezierSpline& ref, const Vec& x, double t);

// Polytope L x <= bound with unit rows and the origin strictly inside.
struct StatePolytope {
  Mat l;
  Vec bound;

  static StatePolytope from_rows(const Mat& rows, const Vec& offsets);
  int rows() const { return static_cast<int>(l.rows()); }
  // largest row violation; negative inside
  double max_violation(const Vec& x) const;
  bool contains(const Vec& x, double tol = 0.0) const;
  // LP probe in every +- coordinate direction
  bool is_bounded() const;
};

// Shrinks every offset by the tube's support in that row direction, so plans
// that respect the result keep the true state feasible. Throws
// ConfigurationError when the tube is too large for the polytope.
StatePolytope tighten_polytope(const StatePolytope& poly, const TrackingLaw& law);

}  // namespace cmpc

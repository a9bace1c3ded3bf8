#pragma once

#include <vector>

#include "cmpc/types.hpp"

namespace cmpc {

// Bernstein basis z(tau) of the given order over [0, duration]; component i
// is binom(p,i) (tau/T)^i (1 - tau/T)^(p-i).
Vec bernstein_basis(int order, double duration, double tau);

// (p+1)x(p+1) lift H with r^(j)(tau) = (1/T^j) xi0^T H^j z(tau) for a curve
// with control points xi0 in the order-p basis.
Mat bezier_derivative_lift(int order);

// Boundary map for curves of order 2n-1: D = [D0 D1] whose columns are the
// endpoint values of the derivative chains, so D^T xi0 stacks the boundary
// derivative vectors (x0, x1). Cached per (n, duration).
struct BoundaryMap {
  Mat d;            // 2n x 2n
  Mat d_inv_t;      // (D^T)^{-1}, applied to [x0; x1] to get xi0
};
BoundaryMap bezier_boundary_map(int n, double duration);

// One polynomial segment of order 2n-1 over [0, duration], carrying the
// control point rows of every derivative up to order n.
struct BezierSegment {
  int n = 0;
  double duration = 0.0;
  Vec xi0;  // 2n control points of the curve itself
  Mat xi;   // (n+1) x 2n; row j holds the order-j derivative control points

  // Segment interpolating full derivative stacks x0 at tau=0 and x1 at
  // tau=duration.
  static BezierSegment from_boundary(int n, double duration, const Vec& x0,
                                     const Vec& x1);

  double value(double tau, int j) const;  // r^(j)(tau), j in [0, n]
  Vec state(double tau) const;            // (r, r', ..., r^(n-1))(tau)
};

// Spatial control points: column i stacks the i-th control point of the
// derivative rows 0..n-1; xi_n holds the order-n derivative control points.
struct SpatialControlPoints {
  Mat zeta;  // n x 2n
  Vec xi_n;  // 2n
};
SpatialControlPoints spatial_points(const BezierSegment& seg);

// Piecewise Bezier curve: N segments of equal duration, C^(n-1) at knots,
// right-continuous in the order-n derivative.
struct BezierSpline {
  int n = 0;
  double period = 0.0;
  double t_start = 0.0;
  std::vector<BezierSegment> segments;

  static BezierSpline from_knots(int n, double period, double t_start,
                                 const std::vector<Vec>& knots);

  double t_end() const { return t_start + period * static_cast<double>(segments.size()); }
  int segment_index(double t) const;
  Vec state(double t) const;
  double derivative(double t, int j) const;
};

// Signed slack of x against conv{columns of points}: nonnegative iff x lies
// in the hull. For two-dimensional points this is exact polygon geometry and
// reports the interior margin; otherwise a small conic QP is solved and the
// magnitude is only as sharp as the solver tolerance.
double hull_membership_slack(const Mat& points, const Vec& x);

}  // namespace cmpc

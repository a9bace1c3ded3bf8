#include "cmpc/bezier.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "cmpc/conic.hpp"

namespace cmpc {

Vec bernstein_basis(int order, double duration, double tau) {
  if (order < 0) throw InvalidInputError("bernstein_basis: negative order");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InvalidInputError("bernstein_basis: duration must be positive");
  const double slack = 1e-9 * std::max(1.0, duration);
  if (tau < -slack || tau > duration + slack)
    throw RangeError("bernstein_basis: tau outside [0, duration]");
  double s = std::clamp(tau / duration, 0.0, 1.0);

  Vec z(order + 1);
  // binomial row times s^i (1-s)^(p-i)
  double binom = 1.0;
  for (int i = 0; i <= order; ++i) {
    z[i] = binom * std::pow(s, i) * std::pow(1.0 - s, order - i);
    binom *= static_cast<double>(order - i) / static_cast<double>(i + 1);
  }
  return z;
}

Mat bezier_derivative_lift(int order) {
  if (order < 1) throw InvalidInputError("bezier_derivative_lift: order must be >= 1");
  const int p = order;
  Mat s = Mat::Zero(p, p + 1);  // differences of consecutive control points
  for (int i = 0; i < p; ++i) {
    s(i, i) = -static_cast<double>(p);
    s(i, i + 1) = static_cast<double>(p);
  }
  Mat r = Mat::Zero(p + 1, p);  // degree elevation back to order p
  for (int i = 0; i < p; ++i) r(i, i) = static_cast<double>(p - i) / p;
  for (int i = 1; i <= p; ++i) r(i, i - 1) = static_cast<double>(i) / p;
  return s.transpose() * r.transpose();
}

namespace {

struct BoundaryKey {
  int n;
  double duration;
  bool operator<(const BoundaryKey& o) const {
    if (n != o.n) return n < o.n;
    return duration < o.duration;
  }
};

}  // namespace

BoundaryMap bezier_boundary_map(int n, double duration) {
  if (n < 1) throw InvalidInputError("bezier_boundary_map: n must be >= 1");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InvalidInputError("bezier_boundary_map: duration must be positive");

  static std::map<BoundaryKey, BoundaryMap> cache;
  static std::mutex cache_mutex;
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find({n, duration});
    if (it != cache.end()) return it->second;
  }

  const int p = 2 * n - 1;
  Mat h = bezier_derivative_lift(p);
  Vec z0 = bernstein_basis(p, duration, 0.0);
  Vec z1 = bernstein_basis(p, duration, duration);

  Mat d(2 * n, 2 * n);
  Vec col0 = z0;
  Vec col1 = z1;
  double scale = 1.0;
  for (int j = 0; j < n; ++j) {
    d.col(j) = col0 / scale;
    d.col(n + j) = col1 / scale;
    col0 = h * col0;
    col1 = h * col1;
    scale *= duration;
  }

  Eigen::JacobiSVD<Mat> svd(d);
  double cond = svd.singularValues()(0) /
                svd.singularValues()(svd.singularValues().size() - 1);
  if (!std::isfinite(cond) || cond > 1e12)
    throw NumericalError("bezier_boundary_map: boundary matrix ill-conditioned");

  BoundaryMap bm;
  bm.d = d;
  bm.d_inv_t = d.transpose().partialPivLu().inverse();

  std::lock_guard<std::mutex> lock(cache_mutex);
  return cache.emplace(BoundaryKey{n, duration}, std::move(bm)).first->second;
}

BezierSegment BezierSegment::from_boundary(int n, double duration, const Vec& x0,
                                           const Vec& x1) {
  if (n < 1) throw InvalidInputError("BezierSegment: n must be >= 1");
  if (x0.size() != n || x1.size() != n)
    throw InvalidInputError("BezierSegment: boundary stacks must have size n");
  if (!x0.allFinite() || !x1.allFinite())
    throw InvalidInputError("BezierSegment: non-finite boundary values");

  auto bm = bezier_boundary_map(n, duration);
  Vec rhs(2 * n);
  rhs.head(n) = x0;
  rhs.tail(n) = x1;

  BezierSegment seg;
  seg.n = n;
  seg.duration = duration;
  seg.xi0 = bm.d_inv_t * rhs;

  Mat h = bezier_derivative_lift(2 * n - 1);
  seg.xi = Mat::Zero(n + 1, 2 * n);
  Vec row = seg.xi0;
  double scale = 1.0;
  for (int j = 0; j <= n; ++j) {
    seg.xi.row(j) = row.transpose() / scale;
    row = h.transpose() * row;
    scale *= duration;
  }
  return seg;
}

double BezierSegment::value(double tau, int j) const {
  if (j < 0 || j > n) throw InvalidInputError("BezierSegment: derivative order out of range");
  Vec z = bernstein_basis(2 * n - 1, duration, tau);
  return xi.row(j).dot(z);
}

Vec BezierSegment::state(double tau) const {
  Vec z = bernstein_basis(2 * n - 1, duration, tau);
  return xi.topRows(n) * z;
}

SpatialControlPoints spatial_points(const BezierSegment& seg) {
  SpatialControlPoints sp;
  sp.zeta = seg.xi.topRows(seg.n);
  sp.xi_n = seg.xi.row(seg.n).transpose();
  return sp;
}

BezierSpline BezierSpline::from_knots(int n, double period, double t_start,
                                      const std::vector<Vec>& knots) {
  if (knots.size() < 2)
    throw InvalidInputError("BezierSpline: need at least two knots");
  for (const auto& k : knots)
    if (k.size() != n) throw InvalidInputError("BezierSpline: knot dimension mismatch");

  BezierSpline spline;
  spline.n = n;
  spline.period = period;
  spline.t_start = t_start;
  spline.segments.reserve(knots.size() - 1);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k)
    spline.segments.push_back(BezierSegment::from_boundary(n, period, knots[k], knots[k + 1]));
  return spline;
}

int BezierSpline::segment_index(double t) const {
  const double slack = 1e-9 * std::max(1.0, std::abs(t_end()));
  if (t < t_start - slack || t > t_end() + slack)
    throw RangeError("BezierSpline: query outside the spline domain");
  int k = static_cast<int>(std::floor((t - t_start) / period));
  return std::clamp(k, 0, static_cast<int>(segments.size()) - 1);
}

Vec BezierSpline::state(double t) const {
  int k = segment_index(t);
  double tau = std::clamp(t - t_start - k * period, 0.0, period);
  return segments[k].state(tau);
}

double BezierSpline::derivative(double t, int j) const {
  int k = segment_index(t);
  double tau = std::clamp(t - t_start - k * period, 0.0, period);
  return segments[k].value(tau, j);
}

namespace {

// Exact planar path: hull of the columns, then the worst signed edge
// distance (positive inside). Degenerate hulls fall back to point/segment
// distance.
double polygon_slack(const Mat& points, const Vec& x) {
  const int k = static_cast<int>(points.cols());
  Eigen::Vector2d p = x;

  // collect distinct points
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < k; ++i) {
    Eigen::Vector2d c = points.col(i);
    bool dup = false;
    for (const auto& q : pts)
      if ((q - c).norm() < 1e-14) dup = true;
    if (!dup) pts.push_back(c);
  }

  if (pts.size() == 1) return -(p - pts[0]).norm();

  // check for collinearity
  Eigen::Vector2d dir = pts[1] - pts[0];
  bool collinear = true;
  for (const auto& q : pts) {
    double cross = dir.x() * (q - pts[0]).y() - dir.y() * (q - pts[0]).x();
    if (std::abs(cross) > 1e-12 * std::max(1.0, dir.norm() * (q - pts[0]).norm()))
      collinear = false;
  }
  if (collinear) {
    // hull is the extreme segment along dir
    double lo = 0.0, hi = 0.0;
    dir.normalize();
    for (const auto& q : pts) {
      double s = dir.dot(q - pts[0]);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    double s = std::clamp(dir.dot(p - pts[0]), lo, hi);
    return -(p - (pts[0] + s * dir)).norm();
  }

  // gift wrapping (counterclockwise)
  std::size_t start = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].x() < pts[start].x() ||
        (pts[i].x() == pts[start].x() && pts[i].y() < pts[start].y()))
      start = i;
  }
  std::vector<Eigen::Vector2d> hull;
  std::size_t cur = start;
  do {
    hull.push_back(pts[cur]);
    std::size_t next = (cur + 1) % pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Eigen::Vector2d a = pts[next] - pts[cur];
      Eigen::Vector2d b = pts[i] - pts[cur];
      double cross = a.x() * b.y() - a.y() * b.x();
      if (cross < 0.0 || (cross == 0.0 && b.norm() > a.norm())) next = i;
    }
    cur = next;
  } while (cur != start && hull.size() <= pts.size());

  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    Eigen::Vector2d a = hull[i];
    Eigen::Vector2d b = hull[(i + 1) % hull.size()];
    Eigen::Vector2d e = b - a;
    double len = e.norm();
    if (len < 1e-14) continue;
    // inward normal for a counterclockwise polygon
    double signed_dist = (e.x() * (p - a).y() - e.y() * (p - a).x()) / len;
    slack = std::min(slack, signed_dist);
  }
  return slack;
}

// General path: distance from x to the hull via a simplex-constrained least
// squares problem solved by the conic module.
double qp_slack(const Mat& points, const Vec& x) {
  const int k = static_cast<int>(points.cols());
  ConicProgram prog(k);
  prog.p = points.transpose() * points;
  // keep the objective matrix comfortably PSD for the solver
  prog.p += 1e-10 * Mat::Identity(k, k);
  prog.q = -points.transpose() * x;
  AffineRow sum = prog.row(-1.0);
  sum.coeffs.setOnes();
  prog.add_equality(sum);
  for (int i = 0; i < k; ++i) prog.nonneg.push_back(i);
  auto res = solve(prog);
  if (res.status != SolveStatus::Optimal)
    throw NumericalError("hull_membership_slack: projection QP did not solve");
  double dist2 = 2.0 * res.objective + x.squaredNorm() - 1e-10 * res.x.squaredNorm();
  return -std::sqrt(std::max(dist2, 0.0));
}

}  // namespace

double hull_membership_slack(const Mat& points, const Vec& x) {
  if (points.rows() != x.size() || points.cols() < 1)
    throw InvalidInputError("hull_membership_slack: dimension mismatch");
  if (points.rows() == 2) return polygon_slack(points, x);
  return qp_slack(points, x);
}

}  // namespace cmpc

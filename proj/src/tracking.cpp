#include "cmpc/tracking.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "cmpc/conic.hpp"
#include "cmpc/numerics.hpp"

namespace cmpc {

namespace {

// coefficients of prod_i (s - p_i), ascending powers; leading 1 dropped
Vec characteristic_coeffs(const std::vector<double>& poles) {
  int n = static_cast<int>(poles.size());
  Vec c = Vec::Zero(n + 1);
  c(0) = 1.0;
  int deg = 0;
  for (double p : poles) {
    for (int i = deg; i >= 0; --i) {
      c(i + 1) += c(i);
      c(i) *= -p;
    }
    ++deg;
  }
  return c.head(n);
}

double checked_gain(const SystemModel& sys, const Vec& x) {
  double gx = sys.g(x);
  if (std::abs(gx) < sys.g_min)
    throw NumericalError("input gain g(x) below the singularity guard");
  return gx;
}

// error drift (e_2, ..., e_n, f(x) - x_d^(n)(t)); control enters the last row
Vec error_drift(const SystemModel& sys, const BezierSpline& ref, const Vec& e,
                const Vec& x, double t) {
  int n = sys.n;
  Vec out(n);
  out.head(n - 1) = e.tail(n - 1);
  out(n - 1) = sys.f(x) - ref.derivative(t, n);
  return out;
}

void check_state(const SystemModel& sys, const BezierSpline& ref, const Vec& x) {
  if (sys.n != ref.n)
    throw InvalidInputError("system and reference dimensions disagree");
  if (x.size() != sys.n) throw InvalidInputError("state dimension mismatch");
}

}  // namespace

TrackingLaw design_tracking_law(int n, const std::vector<double>& poles,
                                const Mat& q, double wbar) {
  if (n < 1) throw InvalidInputError("state dimension must be positive");
  if (static_cast<int>(poles.size()) != n)
    throw InvalidInputError("need exactly one pole per state");
  if (wbar < 0.0) throw InvalidInputError("disturbance bound must be nonnegative");
  for (double p : poles) {
    if (!std::isfinite(p) || p >= 0.0)
      throw PreconditionError("poles must be strictly negative reals");
  }
  if (q.rows() != n || q.cols() != n)
    throw InvalidInputError("Q dimension mismatch");
  if ((q - q.transpose()).norm() > 1e-9 * (1.0 + q.norm()))
    throw InvalidInputError("Q must be symmetric");

  TrackingLaw law;
  law.k = characteristic_coeffs(poles);
  law.f = Mat::Zero(n, n);
  if (n > 1) law.f.topRightCorner(n - 1, n - 1).setIdentity();
  law.f.row(n - 1) = -law.k.transpose();
  law.q = 0.5 * (q + q.transpose());

  Eigen::SelfAdjointEigenSolver<Mat> qe(law.q);
  law.lambda_min_q = qe.eigenvalues().minCoeff();
  if (law.lambda_min_q <= 0.0)
    throw PreconditionError("Q must be positive definite");

  law.p = solve_lyapunov(law.f, law.q);
  Eigen::SelfAdjointEigenSolver<Mat> pe(law.p);
  law.lambda_min_p = pe.eigenvalues().minCoeff();
  law.lambda_max_p = pe.eigenvalues().maxCoeff();
  if (law.lambda_min_p <= 0.0)
    throw NumericalError("Lyapunov certificate lost definiteness");

  law.wbar = wbar;
  law.gamma = 4.0 * std::pow(law.lambda_max_p, 3) / (law.lambda_min_q * law.lambda_min_q);
  law.ebar = std::sqrt(law.gamma * wbar * wbar / law.lambda_min_p);
  law.k_norm = law.k.norm();
  return law;
}

Vec tracking_error(const BezierSpline& ref, const Vec& x, double t) {
  if (x.size() != ref.n) throw InvalidInputError("state dimension mismatch");
  return x - ref.state(t);
}

double lyapunov_value(const TrackingLaw& law, const BezierSpline& ref,
                      const Vec& x, double t) {
  Vec e = tracking_error(ref, x, t);
  if (law.p.rows() != e.size())
    throw InvalidInputError("law and reference dimensions disagree");
  return e.dot(law.p * e);
}

bool in_tube(const TrackingLaw& law, const BezierSpline& ref, const Vec& x,
             double t) {
  double level = law.tube_level();
  return lyapunov_value(law, ref, x, t) <= level + 1e-12 * (1.0 + level);
}

double k_fbl(const SystemModel& sys, const TrackingLaw& law,
             const BezierSpline& ref, const Vec& x, double t) {
  check_state(sys, ref, x);
  double gx = checked_gain(sys, x);
  Vec e = x - ref.state(t);
  return (ref.derivative(t, sys.n) - sys.f(x) - law.k.dot(e)) / gx;
}

double k_ff(const SystemModel& sys, const BezierSpline& ref, const Vec& x,
            double t) {
  check_state(sys, ref, x);
  double gx = checked_gain(sys, x);
  return (ref.derivative(t, sys.n) - sys.f(x)) / gx;
}

double k_clf(const SystemModel& sys, const TrackingLaw& law,
             const BezierSpline& ref, const Vec& x, double t) {
  check_state(sys, ref, x);
  double gx = checked_gain(sys, x);
  int n = sys.n;
  Vec e = x - ref.state(t);
  Vec pe = law.p * e;

  double a = 2.0 * gx * pe(n - 1);
  double b = -law.lambda_min_q * e.squaredNorm() -
             2.0 * pe.dot(error_drift(sys, ref, e, x, t));
  double uff = (ref.derivative(t, n) - sys.f(x)) / gx;

  if (a == 0.0) {
    // decay cannot be influenced; it must already hold up to roundoff
    if (b < -1e-9)
      throw NumericalError("decay condition failed with zero input authority");
    return uff;
  }
  if (a * uff <= b) return uff;
  return b / a;
}

StatePolytope StatePolytope::from_rows(const Mat& rows, const Vec& offsets) {
  if (rows.rows() == 0 || rows.cols() == 0)
    throw InvalidInputError("polytope needs at least one row");
  if (offsets.size() != rows.rows())
    throw InvalidInputError("one offset per polytope row required");

  StatePolytope poly;
  poly.l = rows;
  poly.bound = offsets;
  for (int j = 0; j < rows.rows(); ++j) {
    double norm = poly.l.row(j).norm();
    if (norm < 1e-12) throw InvalidInputError("polytope row is numerically zero");
    poly.l.row(j) /= norm;
    poly.bound(j) /= norm;
    if (poly.bound(j) <= 0.0)
      throw ConfigurationError("origin must be strictly inside the polytope");
  }
  if (!poly.is_bounded())
    throw ConfigurationError("polytope is unbounded along a coordinate direction");
  return poly;
}

double StatePolytope::max_violation(const Vec& x) const {
  if (x.size() != l.cols()) throw InvalidInputError("state dimension mismatch");
  return (l * x - bound).maxCoeff();
}

bool StatePolytope::contains(const Vec& x, double tol) const {
  return max_violation(x) <= tol;
}

bool StatePolytope::is_bounded() const {
  int n = static_cast<int>(l.cols());
  SolveSettings settings;
  settings.max_iter = 20000;
  for (int i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      // maximize sign * x_i over the polytope; divergence means unbounded
      ConicProgram prog(n);
      prog.q = Vec::Zero(n);
      prog.q(i) = -sign;
      for (int j = 0; j < l.rows(); ++j) {
        AffineRow row = prog.row(bound(j));
        row.coeffs = -l.row(j).transpose();
        prog.add_inequality(row);
      }
      if (solve(prog, settings).status != SolveStatus::Optimal) return false;
    }
  }
  return true;
}

StatePolytope tighten_polytope(const StatePolytope& poly, const TrackingLaw& law) {
  if (law.p.rows() != poly.l.cols())
    throw InvalidInputError("law and polytope dimensions disagree");
  double level = law.tube_level();
  Vec shrunk = poly.bound;
  for (int j = 0; j < poly.rows(); ++j) {
    shrunk(j) -= ellipsoid_support(poly.l.row(j).transpose(), law.p, level);
    if (shrunk(j) <= 0.0)
      throw ConfigurationError(
          "disturbance tube exceeds the state polytope; shrink wbar or widen X");
  }
  StatePolytope out;
  out.l = poly.l;
  out.bound = shrunk;
  return out;
}

}  // namespace cmpc

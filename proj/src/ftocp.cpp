#include "cmpc/ftocp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

#include "cmpc/bezier.hpp"

namespace cmpc {

namespace {

// flattened variable order: knot states, inputs, slacks, control points,
// input-bound auxiliaries
struct Layout {
  int n;
  int horizon;
  int u_base;
  int s_base;
  int xi_base;
  int sigma_base;
  int total;

  Layout(int n_, int horizon_) : n(n_), horizon(horizon_) {
    u_base = (horizon + 1) * n;
    s_base = u_base + horizon;
    xi_base = s_base + 2 * horizon;
    sigma_base = xi_base + 2 * n * horizon;
    total = sigma_base + horizon;
  }
  int x(int k, int r) const { return k * n + r; }
  int u(int k) const { return u_base + k; }
  int s(int k, int j) const { return s_base + 2 * k + j; }
  int xi(int k, int r) const { return xi_base + 2 * n * k + r; }
  int sigma(int k) const { return sigma_base + k; }
};

void check_shapes(const FtocpConfig& config, const Vec& x_t,
                  const std::vector<AnchorLin>& anchors) {
  int n = config.n();
  if (config.horizon < 1) throw InvalidInputError("horizon must be at least 1");
  if (config.period <= 0.0) throw InvalidInputError("period must be positive");
  if (x_t.size() != n) throw InvalidInputError("measured state dimension mismatch");
  if (static_cast<int>(anchors.size()) != config.horizon)
    throw InvalidInputError("need one anchor per planned segment");
  for (const AnchorLin& a : anchors) {
    if (a.xbar.size() != n || a.lin.a.rows() != n || a.lin.a.cols() != n ||
        a.lin.b.size() != n || a.lin.c.size() != n)
      throw InvalidInputError("anchor linearization dimension mismatch");
  }
  if (config.w_x.rows() != n || config.w_x.cols() != n ||
      config.w_f.rows() != n || config.w_f.cols() != n)
    throw InvalidInputError("cost weight dimension mismatch");
  if (config.w_u < 0.0) throw InvalidInputError("input weight must be nonnegative");
  if (config.bounds.l.cols() != n)
    throw InvalidInputError("state polytope dimension mismatch");
  if (config.params.law.p.rows() != n)
    throw InvalidInputError("tracking law dimension mismatch");
}

}  // namespace

ConicProgram build_ftocp(const FtocpConfig& config, const Vec& x_t,
                         const std::vector<AnchorLin>& anchors) {
  check_shapes(config, x_t, anchors);
  int n = config.n();
  int N = config.horizon;
  const TrackingLaw& law = config.params.law;

  StatePolytope tight = tighten_polytope(config.bounds, law);
  BoundaryMap map = bezier_boundary_map(n, config.period);

  // derivative mixers: control points of the j-th derivative curve are
  // mixers[j] * xi_k
  Mat lift_t = bezier_derivative_lift(2 * n - 1).transpose();
  std::vector<Mat> mixers(static_cast<std::size_t>(n) + 1);
  mixers[0] = Mat::Identity(2 * n, 2 * n);
  for (int j = 1; j <= n; ++j)
    mixers[static_cast<std::size_t>(j)] =
        lift_t * mixers[static_cast<std::size_t>(j) - 1] / config.period;

  Layout lay(n, N);
  ConicProgram prog(lay.total);

  // objective: sum of stage costs plus terminal cost
  prog.p = Mat::Zero(lay.total, lay.total);
  for (int k = 0; k < N; ++k) {
    prog.p.block(lay.x(k, 0), lay.x(k, 0), n, n) = 2.0 * config.w_x;
    prog.p(lay.u(k), lay.u(k)) = 2.0 * config.w_u;
  }
  prog.p.block(lay.x(N, 0), lay.x(N, 0), n, n) = 2.0 * config.w_f;

  // (a) linearized dynamics between consecutive knots
  for (int k = 0; k < N; ++k) {
    const DiscreteLinearization& lin = anchors[static_cast<std::size_t>(k)].lin;
    for (int r = 0; r < n; ++r) {
      AffineRow row = prog.row(-lin.c(r));
      row.coeffs(lay.x(k + 1, r)) = 1.0;
      for (int c = 0; c < n; ++c) row.coeffs(lay.x(k, c)) -= lin.a(r, c);
      row.coeffs(lay.u(k)) = -lin.b(r);
      prog.add_equality(row);
    }
  }

  // (b) first knot within the tube ellipsoid around the measured state
  {
    Eigen::LLT<Mat> llt(law.p);
    if (llt.info() != Eigen::Success)
      throw NumericalError("tracking certificate is not positive definite");
    Mat r_factor = Mat(llt.matrixL()).transpose();
    SocConstraint tube;
    tube.t = prog.row(std::sqrt(law.tube_level()));
    Vec shift = r_factor * x_t;
    for (int r = 0; r < n; ++r) {
      AffineRow u = prog.row(-shift(r));
      for (int c = 0; c < n; ++c) u.coeffs(lay.x(0, c)) = r_factor(r, c);
      tube.u.push_back(u);
    }
    prog.add_soc(tube);
  }

  // (c) terminal knot at the origin
  for (int r = 0; r < n; ++r) {
    AffineRow row = prog.row(0.0);
    row.coeffs(lay.x(N, r)) = 1.0;
    prog.add_equality(row);
  }

  // (d) control points interpolate the knot pair
  for (int k = 0; k < N; ++k) {
    for (int r = 0; r < 2 * n; ++r) {
      AffineRow row = prog.row(0.0);
      row.coeffs(lay.xi(k, r)) = 1.0;
      for (int c = 0; c < 2 * n; ++c) {
        int var = c < n ? lay.x(k, c) : lay.x(k + 1, c - n);
        row.coeffs(var) -= map.d_inv_t(r, c);
      }
      prog.add_equality(row);
    }
  }

  for (int k = 0; k < N; ++k) {
    const Vec& xbar = anchors[static_cast<std::size_t>(k)].xbar;
    double f_bar = config.params.sys.f(xbar);

    for (int i = 0; i < 2 * n; ++i) {
      // (e) tightened polytope rows on the i-th spatial control point
      for (int jrow = 0; jrow < tight.rows(); ++jrow) {
        AffineRow row = prog.row(tight.bound(jrow));
        for (int j = 0; j < n; ++j) {
          const Mat& mix = mixers[static_cast<std::size_t>(j)];
          for (int m = 0; m < 2 * n; ++m)
            row.coeffs(lay.xi(k, m)) -= tight.l(jrow, j) * mix(i, m);
        }
        prog.add_inequality(row);
      }

      // (f) slack dominates the control point's deviation from the anchor
      SocConstraint dev;
      dev.t = prog.row(0.0);
      dev.t.coeffs(lay.s(k, 0)) = 1.0;
      for (int j = 0; j < n; ++j) {
        const Mat& mix = mixers[static_cast<std::size_t>(j)];
        AffineRow u = prog.row(-xbar(j));
        for (int m = 0; m < 2 * n; ++m) u.coeffs(lay.xi(k, m)) = mix(i, m);
        dev.u.push_back(u);
      }
      prog.add_soc(dev);

      SocConstraint top;
      top.t = prog.row(0.0);
      top.t.coeffs(lay.s(k, 1)) = 1.0;
      const Mat& mix_n = mixers[static_cast<std::size_t>(n)];
      AffineRow u = prog.row(-f_bar);
      for (int m = 0; m < 2 * n; ++m) u.coeffs(lay.xi(k, m)) = mix_n(i, m);
      top.u.push_back(u);
      prog.add_soc(top);
    }

    // (g) SOC reformulation of the quadratic input bound
    SocBlock block = soc_reformulate(config.params, xbar);
    SocConstraint cone;
    cone.t = prog.row(0.5);
    cone.t.coeffs(lay.sigma(k)) = 1.0;
    for (int r = 0; r < block.l.cols(); ++r) {
      AffineRow u = prog.row(0.0);
      u.coeffs(lay.s(k, 0)) = block.l(0, r);
      u.coeffs(lay.s(k, 1)) = block.l(1, r);
      cone.u.push_back(u);
    }
    AffineRow sig = prog.row(0.0);
    sig.coeffs(lay.sigma(k)) = 1.0;
    cone.u.push_back(sig);
    prog.add_soc(cone);

    AffineRow linear = prog.row(block.u_max - block.gamma - 0.25);
    linear.coeffs(lay.sigma(k)) = -1.0;
    linear.coeffs(lay.s(k, 0)) = -block.n(0);
    linear.coeffs(lay.s(k, 1)) = -block.n(1);
    prog.add_inequality(linear);

    prog.nonneg.push_back(lay.s(k, 0));
    prog.nonneg.push_back(lay.s(k, 1));
  }

  return prog;
}

FtocpSolution extract_ftocp(const FtocpConfig& config, const SolveResult& result) {
  if (result.status != SolveStatus::Optimal)
    throw PreconditionError("cannot extract a plan from a non-optimal solve");
  int n = config.n();
  int N = config.horizon;
  Layout lay(n, N);
  if (result.x.size() != lay.total)
    throw InvalidInputError("solution vector does not match the program layout");

  FtocpSolution sol;
  sol.objective = result.objective;
  sol.iterations = result.iterations;
  sol.primal_residual = result.primal_residual;
  sol.dual_residual = result.dual_residual;

  for (int k = 0; k <= N; ++k)
    sol.knots.push_back(result.x.segment(lay.x(k, 0), n));
  for (int k = 0; k < N; ++k) {
    sol.inputs.push_back(result.x(lay.u(k)));
    sol.slacks.push_back(result.x.segment(lay.s(k, 0), 2));
    sol.xi.push_back(result.x.segment(lay.xi(k, 0), 2 * n));
    sol.sigma.push_back(result.x(lay.sigma(k)));
  }

  // the control points must reproduce the knots through the boundary map
  BoundaryMap map = bezier_boundary_map(n, config.period);
  for (int k = 0; k < N; ++k) {
    Vec stacked(2 * n);
    stacked << sol.knots[static_cast<std::size_t>(k)],
        sol.knots[static_cast<std::size_t>(k) + 1];
    Vec expect = map.d_inv_t * stacked;
    double err =
        (sol.xi[static_cast<std::size_t>(k)] - expect).cwiseAbs().maxCoeff();
    if (err > 1e-6 * (1.0 + stacked.norm()))
      throw NumericalError("control points drifted from the knot interpolant");
  }
  return sol;
}

}  // namespace cmpc

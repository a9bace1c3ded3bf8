#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "cmpc/ftocp.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cmpc;

namespace {

StatePolytope unit_box(double half_width) {
  Mat rows = (Mat(4, 2) << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0).finished();
  return StatePolytope::from_rows(rows, Vec::Ones(4) * half_width);
}

// anchors on the straight line from x0 to 0 with zero nominal input, the
// same default the planner uses before its first solve
std::vector<AnchorLin> line_anchors(const SystemModel& sys, const Vec& x0,
                                    int horizon, double period) {
  std::vector<AnchorLin> anchors;
  for (int k = 0; k < horizon; ++k) {
    AnchorLin a;
    double frac = horizon == 0 ? 0.0 : static_cast<double>(k) / horizon;
    a.xbar = x0 * (1.0 - frac);
    a.ubar = 0.0;
    a.lin = exact_discretization(continuous_linearization(sys, a.xbar, a.ubar),
                                 period);
    anchors.push_back(a);
  }
  return anchors;
}

FtocpConfig sincube_config(double wbar, double alpha, double beta, double u_max,
                         int horizon, double period) {
  SystemModel sys = make_system("paper_sincube");
  TrackingLaw law =
      design_tracking_law(2, {-2.0, -2.0}, Mat::Identity(2, 2), wbar);
  FtocpConfig cfg;
  cfg.horizon = horizon;
  cfg.period = period;
  cfg.w_x = Mat::Identity(2, 2);
  cfg.w_u = 0.1;
  cfg.w_f = 10.0 * Mat::Identity(2, 2);
  cfg.bounds = unit_box(1.0);
  cfg.params = make_params(alpha, beta, u_max, law, sys);
  return cfg;
}

}  // namespace

TEST_CASE("the all-zero candidate solves the zero-state instance") {
  FtocpConfig cfg = sincube_config(0.02, 4.0, 4.0, 20.0, 10, 0.25);
  Vec x_t = Vec::Zero(2);
  std::vector<AnchorLin> anchors =
      line_anchors(cfg.params.sys, x_t, cfg.horizon, cfg.period);
  // the feasibility hypothesis of the zero candidate
  REQUIRE(cfg.params.gamma_term(Vec::Zero(2)) <= cfg.params.u_max);

  ConicProgram prog = build_ftocp(cfg, x_t, anchors);
  prog.validate();
  SolveResult res = solve(prog);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.objective <= 1e-6);

  FtocpSolution sol = extract_ftocp(cfg, res);
  REQUIRE(static_cast<int>(sol.knots.size()) == cfg.horizon + 1);
  REQUIRE(static_cast<int>(sol.inputs.size()) == cfg.horizon);
  for (const Vec& x : sol.knots) CHECK(x.norm() <= 1e-5);
  for (double u : sol.inputs) CHECK(std::abs(u) <= 1e-5);
  for (const Vec& s : sol.slacks) {
    CHECK(s.minCoeff() >= -1e-8);
    CHECK(s.norm() <= 1e-4);
  }
}

TEST_CASE("small reachability instance parks the last knot at the origin") {
  SystemModel sys = make_system("double_integrator");
  TrackingLaw law = design_tracking_law(2, {-1.0, -1.0}, Mat::Identity(2, 2), 0.0);
  FtocpConfig cfg;
  cfg.horizon = 2;
  cfg.period = 1.0;
  cfg.w_x = Mat::Identity(2, 2);
  cfg.w_u = 0.1;
  cfg.w_f = 10.0 * Mat::Identity(2, 2);
  cfg.bounds = unit_box(2.0);
  cfg.params = make_params(1.0, 1.0, 100.0, law, sys);

  Vec x_t = (Vec(2) << 1.0, 0.0).finished();
  std::vector<AnchorLin> anchors = line_anchors(sys, x_t, cfg.horizon, cfg.period);
  ConicProgram prog = build_ftocp(cfg, x_t, anchors);
  SolveResult res = solve(prog);
  REQUIRE(res.status == SolveStatus::Optimal);
  FtocpSolution sol = extract_ftocp(cfg, res);

  // wbar = 0 pins the first knot to the measured state
  CHECK((sol.knots[0] - x_t).norm() <= 1e-6);
  CHECK(sol.knots[2].norm() <= 1e-6);

  // dynamics rows hold at the extracted knots
  for (int k = 0; k < 2; ++k) {
    Vec pred = anchors[static_cast<std::size_t>(k)].lin.a * sol.knots[static_cast<std::size_t>(k)] +
               anchors[static_cast<std::size_t>(k)].lin.b * sol.inputs[static_cast<std::size_t>(k)] +
               anchors[static_cast<std::size_t>(k)].lin.c;
    CHECK((sol.knots[static_cast<std::size_t>(k) + 1] - pred).norm() <= 1e-6);
  }

  // the spline through the knots interpolates them
  BezierSpline spline = BezierSpline::from_knots(2, cfg.period, 0.0, sol.knots);
  for (int k = 0; k <= 2; ++k) {
    double t = cfg.period * k;
    CHECK((spline.state(t) - sol.knots[static_cast<std::size_t>(k)]).norm() <=
          1e-9 * (1.0 + sol.knots[static_cast<std::size_t>(k)].norm()));
  }
}

TEST_CASE("a tube wider than the polytope is rejected at build time") {
  FtocpConfig cfg = sincube_config(2.0, 1.0, 1.0, 50.0, 4, 0.25);
  Vec x_t = Vec::Zero(2);
  std::vector<AnchorLin> anchors =
      line_anchors(cfg.params.sys, x_t, cfg.horizon, cfg.period);
  CHECK_THROWS_AS(build_ftocp(cfg, x_t, anchors), ConfigurationError);
}

TEST_CASE("shape mismatches are rejected") {
  FtocpConfig cfg = sincube_config(0.02, 4.0, 4.0, 20.0, 5, 0.25);
  Vec x_t = (Vec(2) << 0.2, 0.0).finished();
  std::vector<AnchorLin> anchors =
      line_anchors(cfg.params.sys, x_t, cfg.horizon, cfg.period);

  std::vector<AnchorLin> short_list(anchors.begin(), anchors.end() - 1);
  CHECK_THROWS_AS(build_ftocp(cfg, x_t, short_list), InvalidInputError);
  CHECK_THROWS_AS(build_ftocp(cfg, Vec::Zero(3), anchors), InvalidInputError);

  FtocpConfig bad = cfg;
  bad.w_x = Mat::Identity(3, 3);
  CHECK_THROWS_AS(build_ftocp(bad, x_t, anchors), InvalidInputError);
  FtocpConfig bad_n = cfg;
  bad_n.horizon = 0;
  CHECK_THROWS_AS(build_ftocp(bad_n, x_t, anchors), InvalidInputError);
}

TEST_CASE("extract refuses non-optimal results") {
  FtocpConfig cfg = sincube_config(0.02, 4.0, 4.0, 20.0, 3, 0.25);
  SolveResult res;  // defaults to IterationLimit
  CHECK_THROWS_AS(extract_ftocp(cfg, res), PreconditionError);
}

TEST_CASE("a representative plan satisfies every planned-trajectory guarantee") {
  FtocpConfig cfg = sincube_config(0.02, 4.0, 4.0, 20.0, 10, 0.25);
  Vec x_t = (Vec(2) << 0.25, 0.0).finished();
  std::vector<AnchorLin> anchors =
      line_anchors(cfg.params.sys, x_t, cfg.horizon, cfg.period);
  ConicProgram prog = build_ftocp(cfg, x_t, anchors);
  SolveSettings settings;
  settings.eps_abs = 1e-9;
  settings.eps_rel = 1e-9;
  settings.max_iter = 400000;
  SolveResult res = solve(prog, settings);
  REQUIRE(res.status == SolveStatus::Optimal);
  FtocpSolution sol = extract_ftocp(cfg, res);

  const SystemModel& sys = cfg.params.sys;
  const TrackingLaw& law = cfg.params.law;
  StatePolytope tight = tighten_polytope(cfg.bounds, law);

  // first knot inside the tube around the measured state, last at the origin
  Eigen::LLT<Mat> llt(law.p);
  Mat r_factor = Mat(llt.matrixL()).transpose();
  CHECK((r_factor * (sol.knots[0] - x_t)).norm() <=
        std::sqrt(law.tube_level()) + 1e-6);
  CHECK(sol.knots.back().norm() <= 1e-6);

  BezierSpline spline = BezierSpline::from_knots(2, cfg.period, 0.0, sol.knots);

  for (int k = 0; k < cfg.horizon; ++k) {
    const Vec& xbar = anchors[static_cast<std::size_t>(k)].xbar;
    const Vec& s = sol.slacks[static_cast<std::size_t>(k)];

    // every spatial control point respects the tightened polytope and the
    // slack really dominates the control-point deviations
    SpatialControlPoints pts =
        spatial_points(spline.segments[static_cast<std::size_t>(k)]);
    for (int i = 0; i < pts.zeta.cols(); ++i) {
      CHECK(tight.max_violation(pts.zeta.col(i)) <= 1e-6);
      CHECK((pts.zeta.col(i) - xbar).norm() <= s(0) + 1e-6);
      CHECK(std::abs(pts.xi_n(i) - sys.f(xbar)) <= s(1) + 1e-6);
    }

    // slack round trip through the quadratic input bound
    CHECK(fbl_bound_rhs(cfg.params, xbar, s.cwiseMax(0.0)) <=
          cfg.params.u_max + 1e-6);
  }

  // the planned reference keeps the tracking bound under u_max everywhere
  test_util::Rng rng(0xf70c9u);
  for (int i = 0; i < 1000; ++i) {
    double t = rng.uniform(0.0, cfg.horizon * cfg.period * 0.999999);
    int k = spline.segment_index(t);
    const Vec& xbar = anchors[static_cast<std::size_t>(k)].xbar;
    Vec sig = sigma_profile(sys, spline, xbar, t);
    CHECK(fbl_bound_rhs(cfg.params, xbar, sig) <= cfg.params.u_max + 1e-5);
  }
}

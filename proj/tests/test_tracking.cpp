#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "cmpc/conic.hpp"
#include "cmpc/numerics.hpp"
#include "cmpc/tracking.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cmpc;

namespace {

// gentle reference curve on [0, 3] for the sincube system (n = 2)
BezierSpline smooth_reference() {
  std::vector<Vec> knots;
  knots.push_back((Vec(2) << 0.0, 0.0).finished());
  knots.push_back((Vec(2) << 0.2, 0.1).finished());
  knots.push_back((Vec(2) << 0.3, -0.05).finished());
  knots.push_back((Vec(2) << 0.25, 0.0).finished());
  return BezierSpline::from_knots(2, 1.0, 0.0, knots);
}

BezierSpline zero_reference(double span) {
  std::vector<Vec> knots(2, Vec::Zero(2));
  return BezierSpline::from_knots(2, span, 0.0, knots);
}

// single segment, so the top reference derivative is smooth over the span
// (at interior knots it jumps, which costs RK4 a little accuracy)
BezierSpline one_piece_reference(double span) {
  std::vector<Vec> knots;
  knots.push_back((Vec(2) << 0.0, 0.0).finished());
  knots.push_back((Vec(2) << 0.3, -0.1).finished());
  return BezierSpline::from_knots(2, span, 0.0, knots);
}

TrackingLaw unit_law(double wbar = 0.1) {
  return design_tracking_law(2, {-1.0, -1.0}, Mat::Identity(2, 2), wbar);
}

}  // namespace

TEST_CASE("double pole at -1 gives the classic companion design") {
  TrackingLaw law = unit_law();
  // (s+1)^2 = s^2 + 2s + 1
  CHECK(law.k(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(law.k(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(law.f(0, 0) == doctest::Approx(0.0));
  CHECK(law.f(0, 1) == doctest::Approx(1.0));
  CHECK(law.f(1, 0) == doctest::Approx(-1.0));
  CHECK(law.f(1, 1) == doctest::Approx(-2.0));
  // hand solve of F^T P + P F = -I
  CHECK(law.p(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(law.p(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(law.p(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(law.k_norm == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("double pole at -2 matches the hand-solved certificate") {
  TrackingLaw law = design_tracking_law(2, {-2.0, -2.0}, Mat::Identity(2, 2), 0.05);
  // (s+2)^2 = s^2 + 4s + 4
  CHECK(law.k(0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(law.k(1) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(law.p(0, 0) == doctest::Approx(1.125).epsilon(1e-12));
  CHECK(law.p(0, 1) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(law.p(1, 1) == doctest::Approx(0.15625).epsilon(1e-12));
}

TEST_CASE("derived constants are consistent with the stored matrices") {
  test_util::Rng rng(0x7acc01u);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform(1.0, 3.999));
    std::vector<double> poles;
    for (int i = 0; i < n; ++i) poles.push_back(-rng.uniform(0.3, 4.0));
    Mat q = Mat::Identity(n, n) * rng.uniform(0.5, 3.0);
    double wbar = rng.uniform(0.0, 0.4);
    TrackingLaw law = design_tracking_law(n, poles, q, wbar);

    // residual of the Lyapunov equation
    Mat res = law.f.transpose() * law.p + law.p * law.f + law.q;
    CHECK(res.norm() <= 1e-10 * law.q.norm());

    Eigen::SelfAdjointEigenSolver<Mat> pe(law.p);
    Eigen::SelfAdjointEigenSolver<Mat> qe(law.q);
    double lmax_p = pe.eigenvalues().maxCoeff();
    double lmin_p = pe.eigenvalues().minCoeff();
    double lmin_q = qe.eigenvalues().minCoeff();
    CHECK(lmin_p > 0.0);
    double gamma = 4.0 * lmax_p * lmax_p * lmax_p / (lmin_q * lmin_q);
    CHECK(law.gamma == doctest::Approx(gamma).epsilon(1e-12));
    CHECK(law.ebar ==
          doctest::Approx(std::sqrt(gamma * wbar * wbar / lmin_p)).epsilon(1e-12));
    CHECK(law.tube_level() == doctest::Approx(gamma * wbar * wbar).epsilon(1e-12));
    CHECK(law.lambda_min_q == doctest::Approx(lmin_q).epsilon(1e-12));

    // the gain really places the requested poles
    Eigen::EigenSolver<Mat> fe(law.f);
    std::vector<double> got;
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(fe.eigenvalues()(i).imag()) <= 1e-6);
      got.push_back(fe.eigenvalues()(i).real());
    }
    std::sort(got.begin(), got.end());
    std::vector<double> want = poles;
    std::sort(want.begin(), want.end());
    for (int i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
  }
}

TEST_CASE("design rejects bad inputs") {
  Mat q = Mat::Identity(2, 2);
  CHECK_THROWS_AS(design_tracking_law(2, {-1.0}, q, 0.1), InvalidInputError);
  CHECK_THROWS_AS(design_tracking_law(2, {-1.0, 0.0}, q, 0.1), PreconditionError);
  CHECK_THROWS_AS(design_tracking_law(2, {-1.0, 0.5}, q, 0.1), PreconditionError);
  CHECK_THROWS_AS(design_tracking_law(2, {-1.0, -1.0}, q, -0.1), InvalidInputError);
  Mat indefinite = (Mat(2, 2) << 1.0, 0.0, 0.0, -1.0).finished();
  CHECK_THROWS_AS(design_tracking_law(2, {-1.0, -1.0}, indefinite, 0.1),
                  PreconditionError);
  Mat skew = (Mat(2, 2) << 1.0, 0.3, -0.3, 1.0).finished();
  CHECK_THROWS_AS(design_tracking_law(2, {-1.0, -1.0}, skew, 0.1), InvalidInputError);
}

TEST_CASE("tracking error and Lyapunov value follow the reference") {
  TrackingLaw law = unit_law();
  BezierSpline ref = smooth_reference();
  Vec x = (Vec(2) << 0.4, -0.2).finished();
  double t = 0.7;
  Vec e = tracking_error(ref, x, t);
  Vec want = x - ref.state(t);
  CHECK((e - want).norm() <= 1e-14);
  double v = lyapunov_value(law, ref, x, t);
  CHECK(v == doctest::Approx(e.dot(law.p * e)).epsilon(1e-12));
  CHECK_THROWS_AS(tracking_error(ref, x, -0.5), RangeError);
  CHECK_THROWS_AS(tracking_error(ref, x, 3.5), RangeError);
}

TEST_CASE("Lyapunov value sits between the eigenvalue bounds") {
  TrackingLaw law = unit_law();
  BezierSpline ref = smooth_reference();
  test_util::Rng rng(0x7acc05u);
  for (int trial = 0; trial < 100; ++trial) {
    double t = rng.uniform(0.0, 3.0);
    Vec e = rng.vector(2, -2.0, 2.0);
    double v = lyapunov_value(law, ref, ref.state(t) + e, t);
    double lo = law.lambda_min_p * e.squaredNorm();
    double hi = law.lambda_max_p * e.squaredNorm();
    CHECK(v >= lo - 1e-12 * (1.0 + hi));
    CHECK(v <= hi + 1e-12 * (1.0 + hi));
  }
}

TEST_CASE("tube membership accepts the boundary and rejects just beyond") {
  TrackingLaw law = unit_law(0.2);
  BezierSpline ref = smooth_reference();
  double t = 1.3;
  double level = law.tube_level();

  Eigen::SelfAdjointEigenSolver<Mat> es(law.p);
  for (int which = 0; which < 2; ++which) {
    Vec dir = es.eigenvectors().col(which);
    double lam = es.eigenvalues()(which);
    // e^T P e == level exactly on the boundary
    Vec e = dir * std::sqrt(level / lam);
    CHECK(in_tube(law, ref, ref.state(t) + e, t));
    CHECK_FALSE(in_tube(law, ref, ref.state(t) + e * 1.01, t));
  }
  CHECK(in_tube(law, ref, ref.state(t), t));
}

TEST_CASE("zero disturbance collapses the tube onto the reference") {
  TrackingLaw law = unit_law(0.0);
  BezierSpline ref = smooth_reference();
  CHECK(law.tube_level() == 0.0);
  CHECK(law.ebar == 0.0);
  CHECK(in_tube(law, ref, ref.state(0.5), 0.5));
  Vec off = ref.state(0.5) + (Vec(2) << 1e-5, 0.0).finished();
  CHECK_FALSE(in_tube(law, ref, off, 0.5));
}

TEST_CASE("closed-loop error derivative is F e by direct substitution") {
  SystemModel sys = make_system("paper_sincube");
  TrackingLaw law = unit_law();
  BezierSpline ref = smooth_reference();
  test_util::Rng rng(0x7acc06u);
  for (int trial = 0; trial < 50; ++trial) {
    double t = rng.uniform(0.0, 3.0);
    Vec x = rng.vector(2, -1.5, 1.5);
    double u = k_fbl(sys, law, ref, x, t);
    Vec e = tracking_error(ref, x, t);
    Vec edot(2);
    edot(0) = e(1);
    edot(1) = sys.f(x) + sys.g(x) * u - ref.derivative(t, 2);
    CHECK((edot - law.f * e).norm() <= 1e-9 * (1.0 + e.norm()));
  }
}

TEST_CASE("feedback linearization reduces the error dynamics to e' = F e") {
  SystemModel sys = make_system("paper_sincube");
  TrackingLaw law = unit_law();
  BezierSpline ref = one_piece_reference(2.0);
  Vec x0 = ref.state(0.0) + (Vec(2) << 0.3, -0.1).finished();
  Vec e0 = tracking_error(ref, x0, 0.0);

  DisturbanceSpec none;
  DisturbanceSignal w(none, 2);
  LoopHooks hooks;
  hooks.input = [&](const Vec& x, double t) { return k_fbl(sys, law, ref, x, t); };
  TrajectoryLog log;
  double t_end = 2.0;
  integrate_closed_loop(sys, w, hooks, x0, 0.0, t_end, 1e-3, log);

  Vec x_final = log.x.back();
  Vec e_pred = mat_exp(law.f * t_end) * e0;
  Vec e_got = x_final - ref.state(t_end);
  CHECK((e_got - e_pred).norm() <= 1e-8 * (1.0 + e0.norm()));
}

TEST_CASE("double integrator against a zero reference uses pure error feedback") {
  SystemModel sys = make_system("double_integrator");
  TrackingLaw law = unit_law();
  BezierSpline ref = zero_reference(5.0);
  Vec x = (Vec(2) << 0.7, -0.3).finished();
  // f = 0 and all reference derivatives vanish, so u = -K^T x
  CHECK(k_fbl(sys, law, ref, x, 1.0) ==
        doctest::Approx(-law.k.dot(x)).epsilon(1e-12));
  CHECK(k_ff(sys, ref, x, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("feedforward holds the reference exactly from on-curve starts") {
  SystemModel sys = make_system("paper_sincube");
  BezierSpline ref = one_piece_reference(1.5);
  DisturbanceSpec none;
  DisturbanceSignal w(none, 2);
  LoopHooks hooks;
  hooks.input = [&](const Vec& x, double t) { return k_ff(sys, ref, x, t); };
  TrajectoryLog log;
  integrate_closed_loop(sys, w, hooks, ref.state(0.0), 0.0, 1.5, 1e-3, log);
  Vec x_final = log.x.back();
  // open loop along the curve; RK4 drift only
  CHECK((x_final - ref.state(1.5)).norm() <= 1e-6);
}

TEST_CASE("singular input gain is refused") {
  SystemModel sys = make_system("paper_sincube");
  sys.g = [](const Vec&) { return 1e-12; };
  TrackingLaw law = unit_law();
  BezierSpline ref = smooth_reference();
  Vec x = (Vec(2) << 0.1, 0.0).finished();
  CHECK_THROWS_AS(k_fbl(sys, law, ref, x, 0.5), NumericalError);
  CHECK_THROWS_AS(k_ff(sys, ref, x, 0.5), NumericalError);
  CHECK_THROWS_AS(k_clf(sys, law, ref, x, 0.5), NumericalError);
}

TEST_CASE("min-norm filter solves its one-dimensional QP") {
  SystemModel sys = make_system("paper_sincube");
  TrackingLaw law = unit_law();
  BezierSpline ref = smooth_reference();
  test_util::Rng rng(0x7acc02u);

  SolveSettings tight;
  tight.eps_abs = 1e-11;
  tight.eps_rel = 1e-11;
  tight.max_iter = 200000;

  int filtered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    double t = rng.uniform(0.0, 3.0);
    Vec x = ref.state(t) + rng.vector(2, -0.8, 0.8);
    double u = k_clf(sys, law, ref, x, t);

    Vec e = tracking_error(ref, x, t);
    Vec pe = law.p * e;
    double a = 2.0 * sys.g(x) * pe(1);
    Vec f_xd(2);
    f_xd(0) = e(1);
    f_xd(1) = sys.f(x) - ref.derivative(t, 2);
    double b = -law.lambda_min_q * e.squaredNorm() - 2.0 * pe.dot(f_xd);
    double uff = k_ff(sys, ref, x, t);
    double ufbl = k_fbl(sys, law, ref, x, t);

    // decay condition holds at the filtered input
    CHECK(a * u <= b + 1e-9 * (1.0 + std::abs(b)));
    // never further from the feedforward than the exact linearizer
    if (a * ufbl <= b) {
      CHECK(std::abs(u - uff) <= std::abs(ufbl - uff) + 1e-12);
    }
    if (a * uff <= b) {
      CHECK(u == doctest::Approx(uff).epsilon(1e-12));
    } else {
      ++filtered;
      if (filtered <= 40) {
        // cross-check against the conic solver on the same QP
        ConicProgram prog(1);
        prog.p = Mat::Identity(1, 1);
        prog.q = (Vec(1) << -uff).finished();
        AffineRow row = prog.row(b);
        row.coeffs(0) = -a;
        prog.add_inequality(row);
        SolveResult sol = solve(prog, tight);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(std::abs(u - sol.x(0)) <= 1e-8 * (1.0 + std::abs(u)));
      }
    }
  }
  // the sample box is wide enough that both branches occur
  CHECK(filtered > 20);
  CHECK(filtered < 200);
}

TEST_CASE("filter returns the feedforward on the reference and at P-orthogonal errors") {
  SystemModel sys = make_system("paper_sincube");
  TrackingLaw law = unit_law();
  BezierSpline smooth = smooth_reference();
  double t = 0.9;
  // zero error: both sides of the decay constraint vanish
  CHECK(k_clf(sys, law, smooth, smooth.state(t), t) ==
        doctest::Approx(k_ff(sys, smooth, smooth.state(t), t)).epsilon(1e-12));
  // against the zero reference the error is the state itself, so an exact
  // (P e)_2 = 0 is constructible: the input cannot affect decay there
  BezierSpline zero = zero_reference(3.0);
  Vec x(2);
  x(0) = 0.3;
  x(1) = -0.3 * law.p(1, 0) / law.p(1, 1);
  CHECK(k_clf(sys, law, zero, x, t) ==
        doctest::Approx(k_ff(sys, zero, x, t)).epsilon(1e-12));
}

TEST_CASE("both tracking laws keep the tube invariant under disturbance") {
  SystemModel sys = make_system("paper_sincube");
  double wbar = 0.15;
  TrackingLaw law = design_tracking_law(2, {-2.0, -2.0}, Mat::Identity(2, 2), wbar);
  BezierSpline ref = smooth_reference();
  double level = law.tube_level();

  // start on the tube boundary
  Eigen::SelfAdjointEigenSolver<Mat> es(law.p);
  Vec e0 = es.eigenvectors().col(0) * std::sqrt(level / es.eigenvalues()(0));
  Vec x0 = ref.state(0.0) + e0;

  for (int kind = 0; kind < 2; ++kind) {
    DisturbanceSpec spec;
    spec.kind = kind == 0 ? DisturbanceSpec::Kind::Sinusoid
                          : DisturbanceSpec::Kind::Uniform;
    spec.wbar = wbar;
    spec.seed = 11;
    DisturbanceSignal w(spec, 2);

    for (int use_clf = 0; use_clf < 2; ++use_clf) {
      LoopHooks hooks;
      hooks.input = [&](const Vec& x, double t) {
        return use_clf ? k_clf(sys, law, ref, x, t) : k_fbl(sys, law, ref, x, t);
      };
      TrajectoryLog log;
      integrate_closed_loop(sys, w, hooks, x0, 0.0, 3.0, 1e-3, log);
      double worst = 0.0;
      for (std::size_t i = 0; i < log.rows(); ++i) {
        const Vec& x = log.x[i];
        worst = std::max(worst, lyapunov_value(law, ref, x, log.t[i]) / level);
      }
      CHECK(worst <= 1.0 + 1e-6);
    }
  }
}

TEST_CASE("polytope construction normalizes rows and checks the origin") {
  Mat rows = (Mat(4, 2) << 2.0, 0.0, -2.0, 0.0, 0.0, 0.5, 0.0, -0.5).finished();
  Vec off = (Vec(4) << 2.0, 2.0, 0.25, 0.25).finished();
  StatePolytope box = StatePolytope::from_rows(rows, off);
  CHECK(box.rows() == 4);
  for (int j = 0; j < 4; ++j) CHECK(box.l.row(j).norm() == doctest::Approx(1.0));
  // |x1| <= 1, |x2| <= 0.5 after normalization
  CHECK(box.bound(0) == doctest::Approx(1.0));
  CHECK(box.bound(2) == doctest::Approx(0.5));

  Vec inside = (Vec(2) << 0.9, 0.0).finished();
  Vec outside = (Vec(2) << 1.2, 0.0).finished();
  CHECK(box.contains(inside));
  CHECK_FALSE(box.contains(outside));
  CHECK(box.max_violation(inside) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(box.max_violation(outside) == doctest::Approx(0.2).epsilon(1e-12));

  // zero row
  Mat zr = (Mat(2, 2) << 0.0, 0.0, 0.0, 0.0).finished();
  CHECK_THROWS_AS(StatePolytope::from_rows(zr, Vec::Ones(2)), InvalidInputError);
  // origin on the boundary or excluded
  Mat one_sided = (Mat(4, 2) << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0).finished();
  Vec zero_off = (Vec(4) << 0.0, 1.0, 1.0, 1.0).finished();
  CHECK_THROWS_AS(StatePolytope::from_rows(one_sided, zero_off), ConfigurationError);
  Vec neg_off = (Vec(4) << -0.5, 1.0, 1.0, 1.0).finished();
  CHECK_THROWS_AS(StatePolytope::from_rows(one_sided, neg_off), ConfigurationError);
  // shape mismatch
  CHECK_THROWS_AS(StatePolytope::from_rows(rows, Vec::Ones(3)), InvalidInputError);
}

TEST_CASE("unbounded polytopes are rejected by the LP probe") {
  // slab |x1| <= 1 leaves x2 free
  Mat slab_rows = (Mat(2, 2) << 1.0, 0.0, -1.0, 0.0).finished();
  CHECK_THROWS_AS(StatePolytope::from_rows(slab_rows, Vec::Ones(2)),
                  ConfigurationError);

  Mat box_rows = (Mat(4, 2) << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0).finished();
  StatePolytope box = StatePolytope::from_rows(box_rows, Vec::Ones(4));
  CHECK(box.is_bounded());

  // triangle bounded without axis-aligned rows
  Mat tri = (Mat(3, 2) << 1.0, 1.0, -1.0, 0.5, 0.0, -1.0).finished();
  Vec tri_off = (Vec(3) << 1.0, 1.0, 1.0).finished();
  CHECK(StatePolytope::from_rows(tri, tri_off).is_bounded());
}

TEST_CASE("tightening subtracts the tube support row by row") {
  TrackingLaw law = unit_law(0.1);
  Mat rows = (Mat(4, 2) << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0).finished();
  StatePolytope box = StatePolytope::from_rows(rows, Vec::Ones(4) * 2.0);
  StatePolytope tight = tighten_polytope(box, law);
  REQUIRE(tight.rows() == 4);
  for (int j = 0; j < 4; ++j) {
    double support =
        ellipsoid_support(box.l.row(j).transpose(), law.p, law.tube_level());
    CHECK(tight.bound(j) ==
          doctest::Approx(box.bound(j) - support).epsilon(1e-12));
    CHECK(tight.bound(j) < box.bound(j));
  }
  // rows are untouched
  CHECK((tight.l - box.l).norm() == 0.0);

  // identity shape: unit ball support in every unit direction is sqrt(level)
  TrackingLaw round = law;
  round.p = Mat::Identity(2, 2);
  round.gamma = 1.0;
  round.wbar = 1.0;
  StatePolytope shrunk = tighten_polytope(box, round);
  for (int j = 0; j < 4; ++j)
    CHECK(shrunk.bound(j) == doctest::Approx(1.0).epsilon(1e-12));

  // every tube state around a point inside the tightened set satisfies the
  // original constraints
  test_util::Rng rng(0x7acc03u);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec xd = rng.vector(2, -2.0, 2.0);
    if (!tight.contains(xd)) continue;
    // random point on the tube boundary around xd
    Vec e = rng.vector(2, -1.0, 1.0);
    e *= std::sqrt(law.tube_level() / e.dot(law.p * e));
    CHECK(box.max_violation(xd + e) <= 1e-9);
  }

  // a tube wider than the box must be rejected
  TrackingLaw wide = unit_law(2.0);
  CHECK_THROWS_AS(tighten_polytope(box, wide), ConfigurationError);

  // zero disturbance tightens nothing
  TrackingLaw none = unit_law(0.0);
  StatePolytope same = tighten_polytope(box, none);
  CHECK((same.bound - box.bound).norm() == 0.0);
}

#include "cmpc/multirate.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "cmpc/dynamics.hpp"

namespace cmpc {

namespace {

std::vector<AnchorLin> linearize_pairs(const FtocpConfig& cfg,
                                       const std::vector<Vec>& xs,
                                       const std::vector<double>& us) {
  std::vector<AnchorLin> pairs;
  pairs.reserve(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    AnchorLin a;
    a.xbar = xs[k];
    a.ubar = us[k];
    a.lin = exact_discretization(
        continuous_linearization(cfg.params.sys, a.xbar, a.ubar), cfg.period);
    pairs.push_back(std::move(a));
  }
  return pairs;
}

std::string describe(const SolveResult& res) {
  std::ostringstream out;
  out << to_string(res.status) << " after " << res.iterations
      << " iterations (primal residual " << res.primal_residual
      << ", dual residual " << res.dual_residual;
  if (!res.detail.empty()) out << "; " << res.detail;
  out << ")";
  return out.str();
}

// Installs an accepted solve: shift the solution into the next warm start,
// rebuild the spline on its grid slot, and remember the pairs it used.
PlannerState accept(PlannerState state, std::vector<AnchorLin> pairs,
                    const SolveResult& res, int index, bool fallback) {
  const FtocpConfig& cfg = state.config.ftocp;
  FtocpSolution sol = extract_ftocp(cfg, res);
  state.index = index;
  state.anchors_x.assign(sol.knots.begin() + 1, sol.knots.end());
  state.anchors_u.assign(sol.inputs.begin() + 1, sol.inputs.end());
  state.anchors_u.push_back(0.0);
  state.spline = BezierSpline::from_knots(cfg.n(), cfg.period,
                                          index * cfg.period, sol.knots);
  state.solution = std::move(sol);
  state.used = std::move(pairs);
  state.fallback_used = fallback;
  return state;
}

}  // namespace

PlannerState initialize(const PlannerConfig& config, const Vec& x0) {
  const FtocpConfig& cfg = config.ftocp;
  int n = cfg.n();
  if (x0.size() != n)
    throw InvalidInputError("initial state dimension mismatch");
  if (!cfg.bounds.contains(x0))
    throw PreconditionError("initial state lies outside the state polytope");

  std::vector<Vec> xs;
  std::vector<double> us(static_cast<std::size_t>(cfg.horizon), 0.0);
  for (int k = 0; k < cfg.horizon; ++k)
    xs.push_back(x0 * (1.0 - static_cast<double>(k) / cfg.horizon));

  PlannerState state;
  state.config = config;
  state.origin.xbar = Vec::Zero(n);
  state.origin.ubar = 0.0;
  state.origin.lin = exact_discretization(
      continuous_linearization(cfg.params.sys, state.origin.xbar, 0.0),
      cfg.period);

  std::vector<AnchorLin> pairs = linearize_pairs(cfg, xs, us);
  SolveResult res = solve(build_ftocp(cfg, x0, pairs), config.settings);
  if (res.status != SolveStatus::Optimal)
    throw ConfigurationError(
        "the first plan is infeasible from the given initial state, so the "
        "initial-feasibility hypothesis fails for this configuration: " +
        describe(res));
  return accept(std::move(state), std::move(pairs), res, 0, false);
}

PlannerState plan_step(const PlannerState& state, const Vec& x_measured,
                       double t) {
  const FtocpConfig& cfg = state.config.ftocp;
  if (x_measured.size() != cfg.n())
    throw InvalidInputError("measured state dimension mismatch");
  int next = state.index + 1;
  double expected = next * cfg.period;
  if (std::abs(t - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
    std::ostringstream out;
    out << "plan_step called at t = " << t
        << " but the next grid instant is t = " << expected;
    throw PreconditionError(out.str());
  }

  std::vector<AnchorLin> pairs =
      linearize_pairs(cfg, state.anchors_x, state.anchors_u);
  const SolveSettings& primary = state.config.primary_settings
                                     ? *state.config.primary_settings
                                     : state.config.settings;
  SolveResult res = solve(build_ftocp(cfg, x_measured, pairs), primary);
  if (res.status == SolveStatus::Optimal)
    return accept(state, std::move(pairs), res, next, false);

  // the pairs behind the still-valid current plan, shifted by one segment,
  // with the cached origin pair filling the freed terminal slot
  std::vector<AnchorLin> shifted(state.used.begin() + 1, state.used.end());
  shifted.push_back(state.origin);
  SolveResult retry =
      solve(build_ftocp(cfg, x_measured, shifted), state.config.settings);
  if (retry.status == SolveStatus::Optimal)
    return accept(state, std::move(shifted), retry, next, true);

  std::ostringstream out;
  out << "planning failed at t = " << t << " (plan " << next
      << "): fresh linearizations ended " << describe(res)
      << "; shifted linearizations ended " << describe(retry);
  throw PlannerFailureError(out.str());
}

double control(const PlannerState& state, const Vec& x, double t) {
  const FtocpConfig& cfg = state.config.ftocp;
  if (x.size() != cfg.n()) throw InvalidInputError("state dimension mismatch");
  double lo = static_cast<double>(state.index) * cfg.period;
  double hi = lo + cfg.period;
  double slack = 1e-9 * std::max(1.0, std::abs(hi));
  if (t < lo - slack || t > hi + slack)
    throw StalenessError(
        "control queried outside the current plan's first segment; step the "
        "planner first");
  return k_clf(cfg.params.sys, cfg.params.law, state.spline, x, t);
}

}  // namespace cmpc

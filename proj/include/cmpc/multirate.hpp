#pragma once

#include <optional>
#include <vector>

#include "cmpc/bezier.hpp"
#include "cmpc/ftocp.hpp"

namespace cmpc {

// Planner parameters: the program template plus solver budgets. When
// primary_settings is set it applies only to the first attempt of each
// plan_step, so a trimmed primary budget still leaves the fallback the full
// one; initialization always gets the full budget.
struct PlannerConfig {
  FtocpConfig ftocp;
  SolveSettings settings;
  std::optional<SolveSettings> primary_settings;
};

// Rolling planner state for one scenario. anchors_x / anchors_u hold the
// warm start for the next plan (the current solution shifted by one);
// `used` keeps the anchor/linearization pairs the current plan was actually
// built with, which the next step's fallback reuses shifted by one with the
// cached origin pair appended.
struct PlannerState {
  PlannerConfig config;
  int index = 0;  // current plan number; the spline spans [iT, (i+N)T]
  std::vector<Vec> anchors_x;
  std::vector<double> anchors_u;
  std::vector<AnchorLin> used;
  AnchorLin origin;
  BezierSpline spline;
  FtocpSolution solution;
  bool fallback_used = false;
};

// Plans the first spline at t = 0 from rest anchors on the straight line
// x0 -> 0 with zero nominal input. x0 outside the state polytope is a
// precondition error; an infeasible first solve is a configuration error
// (the scenario does not admit a feasible initialization).
PlannerState initialize(const PlannerConfig& config, const Vec& x0);

// One replan at the next grid instant t = (index+1)*T: linearize afresh at
// the warm-start anchors, and on a non-optimal solve retry with the current
// plan's pairs shifted by one plus the origin pair. Both attempts failing
// raises PlannerFailureError with the diagnostics of each.
PlannerState plan_step(const PlannerState& state, const Vec& x_measured,
                       double t);

// Tracking command served between planning instants; valid only while t is
// inside the current plan's first segment [iT, (i+1)T].
double control(const PlannerState& state, const Vec& x, double t);

}  // namespace cmpc

#pragma once

#include <vector>

#include "cmpc/conic.hpp"
#include "cmpc/dynamics.hpp"
#include "cmpc/input_bounds.hpp"
#include "cmpc/tracking.hpp"
#include "cmpc/types.hpp"

namespace cmpc {

// One planning anchor: the state/input pair the dynamics were linearized
// about, together with the exact discrete linearization over one period.
struct AnchorLin {
  Vec xbar;
  double ubar = 0.0;
  DiscreteLinearization lin;
};

struct FtocpConfig {
  int horizon = 10;     // segments planned per solve
  double period = 0.25;  // seconds per segment
  Mat w_x;              // stage state weight
  double w_u = 0.1;     // stage input weight
  Mat w_f;              // terminal weight
  StatePolytope bounds;       // raw state polytope, tightened at build time
  InputBoundParams params;    // includes u_max, tracking law, system

  int n() const { return params.sys.n; }
};

struct FtocpSolution {
  std::vector<Vec> knots;      // horizon+1 states
  std::vector<double> inputs;  // horizon nominal inputs
  std::vector<Vec> slacks;     // horizon 2-vectors s_k
  std::vector<Vec> xi;         // horizon position control-point vectors
  std::vector<double> sigma;   // horizon auxiliaries of the input-bound cones
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Assemble one planning problem: decision variables are the knot states, the
// per-segment nominal inputs, the deviation slacks s_k, the position
// control points xi_k, and the input-bound auxiliaries sigma_k. Constraints:
//   (a) linearized dynamics equalities between consecutive knots
//   (b) the first knot lies in the tube ellipsoid around the measured state
//   (c) the last knot is the origin
//   (d) xi_k is the boundary interpolant of (x_k, x_{k+1})
//   (e) every spatial control point satisfies the tightened polytope
//   (f) s_k dominates each control point's deviation from the anchor
//   (g) the SOC reformulation of the quadratic input bound on s_k
// Objective: sum of stage costs plus the terminal cost.
ConicProgram build_ftocp(const FtocpConfig& config, const Vec& x_t,
                         const std::vector<AnchorLin>& anchors);

// De-flatten an Optimal solve into knots/inputs/slacks; checks that the
// control points reproduce the knots through the boundary map.
FtocpSolution extract_ftocp(const FtocpConfig& config, const SolveResult& result);

}  // namespace cmpc

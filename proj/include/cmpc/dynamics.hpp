#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cmpc/types.hpp"

namespace cmpc {

// Chain of n integrators with a scalar input entering the last channel:
//   xdot_i = x_{i+1} (i < n),   xdot_n = f(x) + g(x) u + w_n
// with f(0) = 0 and g bounded away from zero.
struct SystemModel {
  std::string id;
  int n = 0;
  std::function<double(const Vec&)> f;
  std::function<double(const Vec&)> g;
  std::function<Vec(const Vec&)> df;  // gradient of f
  std::function<Vec(const Vec&)> dg;  // gradient of g
  double g_min = 1.0;  // certified lower bound on |g|

  Vec drift(const Vec& x) const;      // (x_2, ..., x_n, f(x))
  Vec input_dir(const Vec& x) const;  // (0, ..., 0, g(x))
};

SystemModel make_sincube_system();     // f = sin(x1) + x2^3, g = 1
SystemModel make_double_integrator();  // f = 0, g = 1
// Lookup by config id: "paper_sincube" or "double_integrator".
SystemModel make_system(const std::string& id);

struct ContinuousLinearization {
  Mat a;
  Vec b;
  Vec c;  // affine remainder: drift(x) + dir(x) u ~= A x + B u + C near the anchor
};

ContinuousLinearization continuous_linearization(const SystemModel& sys,
                                                 const Vec& xbar, double ubar);

struct DiscreteLinearization {
  Mat a;
  Vec b;
  Vec c;
};

// Exact zero-order-hold discretization of xdot = A x + B u + C over one
// period, computed through a single augmented matrix exponential.
DiscreteLinearization exact_discretization(const ContinuousLinearization& lin,
                                           double period);

struct DisturbanceSpec {
  enum class Kind { Zero, Sinusoid, Uniform };
  Kind kind = Kind::Zero;
  double wbar = 0.0;
  double base_frequency = 1.3;  // sinusoid: slowest channel frequency, rad/s
  std::uint64_t seed = 0;       // uniform: stream seed
  double hold = 0.01;           // uniform: redraw period, s
};

// Bounded disturbance on the last channel group; the returned vector always
// satisfies ||w(t)|| <= wbar. Evaluation is a pure function of t so repeated
// integrator stage queries agree.
class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  DisturbanceSignal(const DisturbanceSpec& spec, int dim);

  Vec operator()(double t) const;
  double bound() const { return spec_.wbar; }

 private:
  DisturbanceSpec spec_;
  int dim_ = 0;
  Vec freq_;    // sinusoid frequencies
  Vec phase_;
};

struct TrajectoryLog {
  int n = 0;
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<double> u;
  std::vector<Vec> x_ref;
  std::vector<double> lyapunov;
  std::vector<std::uint8_t> state_ok;
  std::vector<std::uint8_t> input_ok;
  std::vector<std::uint8_t> planner_feasible;
  std::vector<std::uint8_t> fallback_used;
  // side analytics kept out of the CSV trace
  std::vector<double> bound_rhs;
  std::vector<double> planned_input;

  std::size_t rows() const { return t.size(); }
};

struct SampleAnnotation {
  Vec x_ref;  // empty means "no reference": logged as zeros
  double lyapunov = 0.0;
  bool state_ok = true;
  bool input_ok = true;
  bool planner_feasible = true;
  bool fallback_used = false;
  double bound_rhs = 0.0;
  double planned_input = 0.0;
};

struct LoopHooks {
  // runs once per sample time before the step is integrated; planners hang
  // their replan grid off this
  std::function<void(const Vec&, double)> before_step;
  // continuous control law, re-evaluated at every integrator stage
  std::function<double(const Vec&, double)> input;
  // fills the bookkeeping columns for the row logged at each sample time
  std::function<SampleAnnotation(const Vec&, double, double)> annotate;
};

// Fixed-step RK4 roll-out of the closed loop from t0 to t1. Appends one log
// row per sample time including both endpoints. The log argument survives
// an abort mid-run so callers can inspect the partial trace.
void integrate_closed_loop(const SystemModel& sys, const DisturbanceSignal& w,
                           const LoopHooks& hooks, const Vec& x0, double t0,
                           double t1, double dt, TrajectoryLog& log);

}  // namespace cmpc

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmpc/dynamics.hpp"
#include "cmpc/multirate.hpp"

namespace cmpc {

enum class RunMode { Cmpc, ClfOnly, MpcOnly };

const char* to_string(RunMode m);

// One closed-loop run, parsed from a strict JSON document. Unknown keys are
// rejected so a typo cannot silently change a safety-relevant number.
struct ScenarioConfig {
  std::string system_id;
  Vec x0;
  int horizon = 0;
  double period = 0.0;
  double dt = 0.0;
  double duration = 0.0;
  double wbar = 0.0;
  DisturbanceSpec disturbance;  // wbar and seed are copied in from the top level
  Mat polytope_rows;
  Vec polytope_bounds;
  double u_max = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> poles;
  Mat q;         // Lyapunov decrease weight for the tracking design
  Mat w_x, w_f;  // planner stage and terminal weights
  double w_u = 0.1;
  RunMode mode = RunMode::Cmpc;
  std::uint64_t seed = 0;
  std::string output = "trace.csv";
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

// Run aggregates for reporting. The maxima are signed, so a negative value
// is the margin that remained.
struct ScenarioSummary {
  RunMode mode = RunMode::Cmpc;
  long samples = 0;
  double max_state_violation = 0.0;  // max over samples of polytope violation
  double max_input_excess = 0.0;     // max of |u| - u_max
  long state_violations = 0;         // samples more than 1e-6 outside
  long input_violations = 0;         // samples with |u| > u_max + 1e-6
  int plans_attempted = 0;           // planning instants, initialization included
  int plans_succeeded = 0;
  int fallback_count = 0;
  bool hard_failure = false;  // a planning instant exhausted both attempts,
                              // or the roll-out diverged
  bool completed = false;     // the roll-out reached the configured duration
  std::string failure_detail;
  double max_tube_ratio = 0.0;       // max V over the tube level, 0 if level is 0
  double first_plan_max_spacing = 0.0;  // max consecutive-knot distance, first plan
  double max_plan_deviation = 0.0;   // max |u - u*_0| against the active plan
};

struct ScenarioResult {
  TrajectoryLog log;
  ScenarioSummary summary;
};

// Simulates the configured mode: cmpc replans every period and tracks the
// spline; clf_only tracks the zero reference with no constraint handling;
// mpc_only holds each plan's first input constant with no tracker (and after
// a hard planner failure keeps the last input, flagged in the log).
// A hard failure in cmpc mode aborts the run and is reported in the summary
// together with the partial log; the same applies when a roll-out diverges,
// which an abandoned open-loop baseline can do in finite time.
ScenarioResult run_scenario(const ScenarioConfig& config);

// CSV trace with columns t, x1..xn, u, xd1..xdn, V, state_ok, input_ok,
// planner_feasible, fallback_used. Floats are shortest round-trip decimals,
// so equal logs serialize to byte-identical text.
std::string csv_text(const TrajectoryLog& log);
void write_csv(const TrajectoryLog& log, const std::string& path);

// Violation metrics recomputed from CSV text alone plus the config's
// polytope and input bound; used to cross-check a summary against the file
// that was actually written. Agreement is exact because the CSV round-trips
// doubles bit for bit.
struct CsvCheck {
  long samples = 0;
  double max_state_violation = 0.0;
  double max_input_excess = 0.0;
  long state_violations = 0;
  long input_violations = 0;
};
CsvCheck summarize_csv(const std::string& csv, const ScenarioConfig& config);

// Summary record as a JSON document (stable key order).
std::string summary_json(const ScenarioConfig& config,
                         const ScenarioSummary& summary);

struct SweepRow {
  double alpha = 0.0;
  double beta = 0.0;
  ScenarioSummary summary;
  std::string error;  // nonempty when this point failed outright
};

// Reruns the base scenario at each (alpha, beta) point. A point that throws
// is recorded and the sweep continues.
std::vector<SweepRow> run_sweep(
    const ScenarioConfig& base,
    const std::vector<std::pair<double, double>>& points);

// Fixed-width comparison table of sweep rows.
std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace cmpc

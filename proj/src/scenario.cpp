#include "cmpc/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>

#include "json.hpp"

namespace cmpc {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) {
  throw ConfigurationError("scenario config: " + msg);
}

void reject_unknown(const json& obj, const char* where,
                    std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known)
      config_fail("unknown key \"" + item.key() + "\" in " + where);
  }
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    config_fail(std::string("missing required key \"") + key + "\"");
  return *it;
}

double as_number(const json& v, const char* key) {
  if (!v.is_number())
    config_fail(std::string("\"") + key + "\" must be a number");
  return v.get<double>();
}

double number_at(const json& obj, const char* key) {
  return as_number(require(obj, key), key);
}

double positive_at(const json& obj, const char* key) {
  double v = number_at(obj, key);
  if (!(v > 0.0) || !std::isfinite(v))
    config_fail(std::string("\"") + key + "\" must be positive");
  return v;
}

double nonneg_at(const json& obj, const char* key) {
  double v = number_at(obj, key);
  if (!(v >= 0.0) || !std::isfinite(v))
    config_fail(std::string("\"") + key + "\" must be nonnegative");
  return v;
}

std::string string_at(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string())
    config_fail(std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

Vec vec_from(const json& v, const char* key, int size) {
  if (!v.is_array() || static_cast<int>(v.size()) != size)
    config_fail(std::string("\"") + key + "\" must be an array of " +
                std::to_string(size) + " numbers");
  Vec out(size);
  for (int i = 0; i < size; ++i) out(i) = as_number(v[static_cast<std::size_t>(i)], key);
  if (!out.allFinite())
    config_fail(std::string("\"") + key + "\" must be finite");
  return out;
}

// a weight entry is either a scalar multiple of the identity or a full
// square matrix
Mat weight_from(const json& v, const char* key, int n) {
  if (v.is_number()) {
    double s = as_number(v, key);
    if (!std::isfinite(s) || s < 0.0)
      config_fail(std::string("\"") + key + "\" must be nonnegative");
    return s * Mat::Identity(n, n);
  }
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    config_fail(std::string("\"") + key + "\" must be a scalar or an " +
                std::to_string(n) + "x" + std::to_string(n) + " matrix");
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    out.row(i) = vec_from(v[static_cast<std::size_t>(i)], key, n).transpose();
  return out;
}

void check_multiple(double small, double big, const char* small_name,
                    const char* big_name) {
  double ratio = big / small;
  double rounded = std::llround(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    config_fail(std::string("\"") + big_name +
                "\" must be an integer multiple of \"" + small_name + "\"");
}

double max_knot_spacing(const std::vector<Vec>& knots) {
  double spacing = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k)
    spacing = std::max(spacing, (knots[k + 1] - knots[k]).norm());
  return spacing;
}

void tally(ScenarioResult& out, const StatePolytope& box, double u_max,
           double level, long expected_samples) {
  ScenarioSummary& s = out.summary;
  const TrajectoryLog& log = out.log;
  s.samples = static_cast<long>(log.rows());
  s.completed = s.samples == expected_samples;
  for (std::size_t j = 0; j < log.rows(); ++j) {
    // the signed maxima start from the first sample so an untroubled run
    // reports its actual margin; the fold order matches summarize_csv so
    // the two agree bit for bit
    double viol = box.max_violation(log.x[j]);
    double excess = std::abs(log.u[j]) - u_max;
    if (j == 0) {
      s.max_state_violation = viol;
      s.max_input_excess = excess;
    } else {
      s.max_state_violation = std::max(s.max_state_violation, viol);
      s.max_input_excess = std::max(s.max_input_excess, excess);
    }
    if (!log.state_ok[j]) ++s.state_violations;
    if (!log.input_ok[j]) ++s.input_violations;
    if (level > 0.0)
      s.max_tube_ratio = std::max(s.max_tube_ratio, log.lyapunov[j] / level);
    s.max_plan_deviation = std::max(s.max_plan_deviation,
                                    std::abs(log.u[j] - log.planned_input[j]));
  }
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_field(std::string_view field) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw InvalidInputError("csv: malformed number \"" + std::string(field) +
                            "\"");
  return v;
}

std::string csv_header(int n) {
  std::string out = "t";
  for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
  out += ",u";
  for (int i = 1; i <= n; ++i) out += ",xd" + std::to_string(i);
  out += ",V,state_ok,input_ok,planner_feasible,fallback_used";
  return out;
}

}  // namespace

const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Cmpc:
      return "cmpc";
    case RunMode::ClfOnly:
      return "clf_only";
    case RunMode::MpcOnly:
      return "mpc_only";
  }
  return "unknown";
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    config_fail(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) config_fail("the top level must be an object");
  reject_unknown(doc, "the top level",
                 {"system", "x0", "N", "T", "dt", "duration", "wbar",
                  "disturbance", "polytope", "u_max", "alpha", "beta", "poles",
                  "Q", "cost_weights", "mode", "seed", "output"});

  ScenarioConfig cfg;
  cfg.system_id = string_at(doc, "system");
  SystemModel sys;
  try {
    sys = make_system(cfg.system_id);
  } catch (const Error& e) {
    config_fail(e.what());
  }
  const int n = sys.n;

  cfg.x0 = vec_from(require(doc, "x0"), "x0", n);

  const json& horizon = require(doc, "N");
  if (!horizon.is_number_integer() || horizon.get<long>() < 1)
    config_fail("\"N\" must be a positive integer");
  cfg.horizon = horizon.get<int>();

  cfg.period = positive_at(doc, "T");
  cfg.dt = positive_at(doc, "dt");
  cfg.duration = positive_at(doc, "duration");
  check_multiple(cfg.dt, cfg.period, "dt", "T");
  check_multiple(cfg.period, cfg.duration, "T", "duration");

  cfg.wbar = nonneg_at(doc, "wbar");

  if (doc.contains("disturbance")) {
    const json& d = doc["disturbance"];
    if (!d.is_object()) config_fail("\"disturbance\" must be an object");
    reject_unknown(d, "\"disturbance\"", {"kind", "base_frequency", "hold"});
    std::string kind = string_at(d, "kind");
    if (kind == "zero") {
      cfg.disturbance.kind = DisturbanceSpec::Kind::Zero;
    } else if (kind == "sinusoid") {
      cfg.disturbance.kind = DisturbanceSpec::Kind::Sinusoid;
    } else if (kind == "uniform") {
      cfg.disturbance.kind = DisturbanceSpec::Kind::Uniform;
    } else {
      config_fail("\"disturbance.kind\" must be zero, sinusoid, or uniform");
    }
    if (d.contains("base_frequency"))
      cfg.disturbance.base_frequency = positive_at(d, "base_frequency");
    if (d.contains("hold")) cfg.disturbance.hold = positive_at(d, "hold");
  }

  const json& poly = require(doc, "polytope");
  if (!poly.is_object()) config_fail("\"polytope\" must be an object");
  reject_unknown(poly, "\"polytope\"", {"rows", "bounds"});
  const json& rows = require(poly, "rows");
  if (!rows.is_array() || rows.empty())
    config_fail("\"polytope.rows\" must be a nonempty array of rows");
  cfg.polytope_rows = Mat(static_cast<int>(rows.size()), n);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    cfg.polytope_rows.row(i) =
        vec_from(rows[static_cast<std::size_t>(i)], "polytope.rows", n)
            .transpose();
  cfg.polytope_bounds = vec_from(require(poly, "bounds"), "polytope.bounds",
                                 static_cast<int>(rows.size()));

  cfg.u_max = positive_at(doc, "u_max");
  cfg.alpha = nonneg_at(doc, "alpha");
  cfg.beta = nonneg_at(doc, "beta");

  Vec poles = vec_from(require(doc, "poles"), "poles", n);
  for (int i = 0; i < n; ++i) {
    if (!(poles(i) < 0.0))
      config_fail("\"poles\" must all be strictly negative");
  }
  cfg.poles.assign(poles.data(), poles.data() + n);

  cfg.q = doc.contains("Q") ? weight_from(doc["Q"], "Q", n)
                            : Mat::Identity(n, n);

  cfg.w_x = Mat::Identity(n, n);
  cfg.w_u = 0.1;
  cfg.w_f = 10.0 * Mat::Identity(n, n);
  if (doc.contains("cost_weights")) {
    const json& cw = doc["cost_weights"];
    if (!cw.is_object()) config_fail("\"cost_weights\" must be an object");
    reject_unknown(cw, "\"cost_weights\"", {"state", "input", "terminal"});
    if (cw.contains("state")) cfg.w_x = weight_from(cw["state"], "cost_weights.state", n);
    if (cw.contains("input")) cfg.w_u = nonneg_at(cw, "input");
    if (cw.contains("terminal"))
      cfg.w_f = weight_from(cw["terminal"], "cost_weights.terminal", n);
  }

  std::string mode = string_at(doc, "mode");
  if (mode == "cmpc") {
    cfg.mode = RunMode::Cmpc;
  } else if (mode == "clf_only") {
    cfg.mode = RunMode::ClfOnly;
  } else if (mode == "mpc_only") {
    cfg.mode = RunMode::MpcOnly;
  } else {
    config_fail("\"mode\" must be cmpc, clf_only, or mpc_only");
  }

  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned())
      config_fail("\"seed\" must be a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    cfg.output = string_at(doc, "output");
    if (cfg.output.empty()) config_fail("\"output\" must not be empty");
  }

  cfg.disturbance.wbar = cfg.wbar;
  cfg.disturbance.seed = cfg.seed;
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigurationError("cannot read config file: " + path);
  std::ostringstream text;
  text << file.rdbuf();
  return parse_scenario(text.str());
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  SystemModel sys = make_system(config.system_id);
  if (config.x0.size() != sys.n)
    throw ConfigurationError("scenario config: x0 dimension mismatch");
  TrackingLaw law =
      design_tracking_law(sys.n, config.poles, config.q, config.wbar);
  StatePolytope box =
      StatePolytope::from_rows(config.polytope_rows, config.polytope_bounds);

  DisturbanceSpec spec = config.disturbance;
  spec.wbar = config.wbar;
  spec.seed = config.seed;
  DisturbanceSignal w(spec, sys.n);

  const double level = law.tube_level();
  const double u_max = config.u_max;

  ScenarioResult out;
  out.summary.mode = config.mode;
  const long expected_samples =
      std::llround(config.duration / config.dt) + 1;

  if (config.mode == RunMode::ClfOnly) {
    // track the rest reference with no planner and no constraint handling
    std::vector<Vec> rest{Vec::Zero(sys.n), Vec::Zero(sys.n)};
    BezierSpline zero_ref =
        BezierSpline::from_knots(sys.n, config.duration, 0.0, rest);
    LoopHooks hooks;
    hooks.input = [&](const Vec& x, double t) {
      return k_clf(sys, law, zero_ref, x, t);
    };
    hooks.annotate = [&](const Vec& x, double t, double u) {
      SampleAnnotation ann;
      ann.x_ref = zero_ref.state(t);
      ann.lyapunov = lyapunov_value(law, zero_ref, x, t);
      ann.state_ok = box.max_violation(x) <= 1e-6;
      ann.input_ok = std::abs(u) <= u_max + 1e-6;
      ann.planned_input = u;  // no plan to deviate from
      return ann;
    };
    try {
      integrate_closed_loop(sys, w, hooks, config.x0, 0.0, config.duration,
                            config.dt, out.log);
    } catch (const NumericalError& e) {
      out.summary.hard_failure = true;
      out.summary.failure_detail = e.what();
    }
    tally(out, box, u_max, level, expected_samples);
    return out;
  }

  PlannerConfig pc;
  pc.ftocp.horizon = config.horizon;
  pc.ftocp.period = config.period;
  pc.ftocp.w_x = config.w_x;
  pc.ftocp.w_u = config.w_u;
  pc.ftocp.w_f = config.w_f;
  pc.ftocp.bounds = box;
  pc.ftocp.params = make_params(config.alpha, config.beta, u_max, law, sys);
  pc.settings.eps_abs = 1e-8;
  pc.settings.eps_rel = 1e-8;
  // stiff gain settings are still optimal, just slow to polish
  pc.settings.max_iter = 200000;

  PlannerState st = initialize(pc, config.x0);
  out.summary.plans_attempted = 1;
  out.summary.plans_succeeded = 1;
  out.summary.first_plan_max_spacing = max_knot_spacing(st.solution.knots);

  const bool track = config.mode == RunMode::Cmpc;
  double held = st.solution.inputs[0];
  bool planner_dead = false;

  LoopHooks hooks;
  hooks.before_step = [&](const Vec& x, double t) {
    int i = static_cast<int>(std::llround(t / config.period));
    bool on_grid = i == st.index + 1 &&
                   std::abs(t - i * config.period) <=
                       1e-9 * std::max(1.0, std::abs(t));
    if (planner_dead || !on_grid) return;
    ++out.summary.plans_attempted;
    if (track) {
      // a hard failure propagates and aborts the run with the partial log
      st = plan_step(st, x, t);
      ++out.summary.plans_succeeded;
      if (st.fallback_used) ++out.summary.fallback_count;
    } else {
      try {
        st = plan_step(st, x, t);
        ++out.summary.plans_succeeded;
        if (st.fallback_used) ++out.summary.fallback_count;
        held = st.solution.inputs[0];
      } catch (const PlannerFailureError& e) {
        // the baseline has no recovery story: keep the last input and let
        // the log show what open-loop drift does
        planner_dead = true;
        out.summary.hard_failure = true;
        out.summary.failure_detail = e.what();
      }
    }
  };
  if (track) {
    hooks.input = [&](const Vec& x, double t) { return control(st, x, t); };
  } else {
    hooks.input = [&](const Vec&, double) { return held; };
  }
  hooks.annotate = [&](const Vec& x, double t, double u) {
    SampleAnnotation ann;
    bool ref_valid = !planner_dead && t <= st.spline.t_end();
    if (ref_valid) {
      ann.x_ref = st.spline.state(t);
      ann.lyapunov = lyapunov_value(law, st.spline, x, t);
    }
    ann.state_ok = box.max_violation(x) <= 1e-6;
    ann.input_ok = std::abs(u) <= u_max + 1e-6;
    ann.planner_feasible = !planner_dead;
    ann.fallback_used = !planner_dead && st.fallback_used;
    ann.planned_input = planner_dead ? held : st.solution.inputs[0];
    if (track && ref_valid) {
      const Vec& xbar = st.used.front().xbar;
      ann.bound_rhs =
          fbl_bound_rhs(pc.ftocp.params, xbar,
                        sigma_profile(sys, st.spline, xbar, t));
    }
    return ann;
  };

  try {
    integrate_closed_loop(sys, w, hooks, config.x0, 0.0, config.duration,
                          config.dt, out.log);
  } catch (const PlannerFailureError& e) {
    out.summary.hard_failure = true;
    out.summary.failure_detail = e.what();
  } catch (const NumericalError& e) {
    // an abandoned baseline can escape in finite time; report the partial
    // trace instead of losing the violations it already logged
    out.summary.hard_failure = true;
    out.summary.failure_detail = e.what();
  }
  tally(out, box, u_max, level, expected_samples);
  return out;
}

std::string csv_text(const TrajectoryLog& log) {
  std::string out = csv_header(log.n);
  out += '\n';
  for (std::size_t j = 0; j < log.rows(); ++j) {
    append_double(out, log.t[j]);
    for (int c = 0; c < log.n; ++c) {
      out += ',';
      append_double(out, log.x[j](c));
    }
    out += ',';
    append_double(out, log.u[j]);
    for (int c = 0; c < log.n; ++c) {
      out += ',';
      append_double(out, log.x_ref[j](c));
    }
    out += ',';
    append_double(out, log.lyapunov[j]);
    out += log.state_ok[j] ? ",1" : ",0";
    out += log.input_ok[j] ? ",1" : ",0";
    out += log.planner_feasible[j] ? ",1" : ",0";
    out += log.fallback_used[j] ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

void write_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ConfigurationError("cannot open output file: " + path);
  std::string text = csv_text(log);
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw ConfigurationError("failed writing output file: " + path);
}

CsvCheck summarize_csv(const std::string& csv, const ScenarioConfig& config) {
  SystemModel sys = make_system(config.system_id);
  StatePolytope box =
      StatePolytope::from_rows(config.polytope_rows, config.polytope_bounds);
  const int n = sys.n;
  const int cols = 2 * n + 7;  // t, states, u, references, V, four flags

  std::size_t pos = csv.find('\n');
  if (pos == std::string::npos)
    throw InvalidInputError("csv: missing header line");
  if (csv.substr(0, pos) != csv_header(n))
    throw InvalidInputError("csv: header does not match the trace schema");

  CsvCheck check;
  Vec x(n);
  std::size_t line_start = pos + 1;
  while (line_start < csv.size()) {
    std::size_t line_end = csv.find('\n', line_start);
    if (line_end == std::string::npos) line_end = csv.size();
    std::string_view line(csv.data() + line_start, line_end - line_start);
    if (!line.empty()) {
      int field = 0;
      double u = 0.0;
      std::size_t start = 0;
      while (start <= line.size()) {
        std::size_t comma = line.find(',', start);
        std::size_t end = comma == std::string_view::npos ? line.size() : comma;
        std::string_view cell = line.substr(start, end - start);
        if (field >= 1 && field <= n) {
          x(field - 1) = parse_field(cell);
        } else if (field == n + 1) {
          u = parse_field(cell);
        }
        ++field;
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (field != cols)
        throw InvalidInputError("csv: row has " + std::to_string(field) +
                                " fields; expected " + std::to_string(cols));
      double viol = box.max_violation(x);
      double excess = std::abs(u) - config.u_max;
      if (check.samples == 0) {
        check.max_state_violation = viol;
        check.max_input_excess = excess;
      } else {
        check.max_state_violation = std::max(check.max_state_violation, viol);
        check.max_input_excess = std::max(check.max_input_excess, excess);
      }
      if (viol > 1e-6) ++check.state_violations;
      if (excess > 1e-6) ++check.input_violations;
      ++check.samples;
    }
    line_start = line_end + 1;
  }
  return check;
}

std::string summary_json(const ScenarioConfig& config,
                         const ScenarioSummary& s) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(s.mode);
  j["system"] = config.system_id;
  j["alpha"] = config.alpha;
  j["beta"] = config.beta;
  j["seed"] = config.seed;
  j["samples"] = s.samples;
  j["max_state_violation"] = s.max_state_violation;
  j["max_input_excess"] = s.max_input_excess;
  j["state_violations"] = s.state_violations;
  j["input_violations"] = s.input_violations;
  j["plans_attempted"] = s.plans_attempted;
  j["plans_succeeded"] = s.plans_succeeded;
  j["fallback_count"] = s.fallback_count;
  j["completed"] = s.completed;
  j["hard_failure"] = s.hard_failure;
  if (!s.failure_detail.empty()) j["failure_detail"] = s.failure_detail;
  j["max_tube_ratio"] = s.max_tube_ratio;
  j["first_plan_max_spacing"] = s.first_plan_max_spacing;
  j["max_plan_deviation"] = s.max_plan_deviation;
  return j.dump(2) + "\n";
}

std::vector<SweepRow> run_sweep(
    const ScenarioConfig& base,
    const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2)
    throw InvalidInputError("a sweep needs at least two (alpha, beta) points");
  std::vector<SweepRow> rows;
  rows.reserve(points.size());
  for (const auto& [alpha, beta] : points) {
    SweepRow row;
    row.alpha = alpha;
    row.beta = beta;
    ScenarioConfig cfg = base;
    cfg.alpha = alpha;
    cfg.beta = beta;
    try {
      row.summary = run_scenario(cfg).summary;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << std::setw(8) << "alpha" << std::setw(8) << "beta" << std::setw(15)
      << "knot_spacing" << std::setw(14) << "max|u-u*0|" << std::setw(12)
      << "state_viol" << std::setw(12) << "input_viol" << std::setw(11)
      << "fallbacks" << "  note\n";
  for (const SweepRow& row : rows) {
    out << std::setw(8) << row.alpha << std::setw(8) << row.beta;
    if (!row.error.empty()) {
      out << "  error: " << row.error << '\n';
      continue;
    }
    const ScenarioSummary& s = row.summary;
    out << std::setw(15) << std::setprecision(6) << s.first_plan_max_spacing
        << std::setw(14) << std::setprecision(6) << s.max_plan_deviation
        << std::setw(12) << s.state_violations << std::setw(12)
        << s.input_violations << std::setw(11) << s.fallback_count << "  "
        << (s.hard_failure ? "hard failure" : "ok") << '\n';
  }
  return out.str();
}

}  // namespace cmpc

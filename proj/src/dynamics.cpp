#include "cmpc/dynamics.hpp"

#include <cmath>

#include "cmpc/numerics.hpp"

namespace cmpc {

Vec SystemModel::drift(const Vec& x) const {
  Vec out(n);
  out.head(n - 1) = x.tail(n - 1);
  out[n - 1] = f(x);
  return out;
}

Vec SystemModel::input_dir(const Vec& x) const {
  Vec out = Vec::Zero(n);
  out[n - 1] = g(x);
  return out;
}

SystemModel make_sincube_system() {
  SystemModel sys;
  sys.id = "paper_sincube";
  sys.n = 2;
  sys.f = [](const Vec& x) { return std::sin(x[0]) + x[1] * x[1] * x[1]; };
  sys.g = [](const Vec&) { return 1.0; };
  sys.df = [](const Vec& x) {
    Vec g(2);
    g[0] = std::cos(x[0]);
    g[1] = 3.0 * x[1] * x[1];
    return g;
  };
  sys.dg = [](const Vec&) { return Vec::Zero(2); };
  sys.g_min = 1.0;
  return sys;
}

SystemModel make_double_integrator() {
  SystemModel sys;
  sys.id = "double_integrator";
  sys.n = 2;
  sys.f = [](const Vec&) { return 0.0; };
  sys.g = [](const Vec&) { return 1.0; };
  sys.df = [](const Vec&) { return Vec::Zero(2); };
  sys.dg = [](const Vec&) { return Vec::Zero(2); };
  sys.g_min = 1.0;
  return sys;
}

SystemModel make_system(const std::string& id) {
  if (id == "paper_sincube") return make_sincube_system();
  if (id == "double_integrator") return make_double_integrator();
  throw InvalidInputError("make_system: unknown system id '" + id + "'");
}

ContinuousLinearization continuous_linearization(const SystemModel& sys,
                                                 const Vec& xbar, double ubar) {
  if (xbar.size() != sys.n)
    throw InvalidInputError("continuous_linearization: anchor dimension mismatch");
  if (!xbar.allFinite() || !std::isfinite(ubar))
    throw InvalidInputError("continuous_linearization: non-finite anchor");

  const int n = sys.n;
  ContinuousLinearization lin;
  lin.a = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) lin.a(i, i + 1) = 1.0;
  lin.a.row(n - 1) = (sys.df(xbar) + sys.dg(xbar) * ubar).transpose();
  lin.b = sys.input_dir(xbar);
  lin.c = sys.drift(xbar) + lin.b * ubar - lin.a * xbar - lin.b * ubar;
  return lin;
}

DiscreteLinearization exact_discretization(const ContinuousLinearization& lin,
                                           double period) {
  if (!(period > 0.0) || !std::isfinite(period))
    throw InvalidInputError("exact_discretization: period must be positive");
  const int n = static_cast<int>(lin.a.rows());

  // one augmented exponential yields A, B and C at once:
  // exp([[A, B, C],[0,0,0],[0,0,0]] T) = [[A_d, B_d, C_d],[0,1,0],[0,0,1]]
  Mat aug = Mat::Zero(n + 2, n + 2);
  aug.topLeftCorner(n, n) = lin.a;
  aug.block(0, n, n, 1) = lin.b;
  aug.block(0, n + 1, n, 1) = lin.c;
  Mat e = mat_exp(aug * period);

  DiscreteLinearization disc;
  disc.a = e.topLeftCorner(n, n);
  disc.b = e.block(0, n, n, 1);
  disc.c = e.block(0, n + 1, n, 1);
  return disc;
}

DisturbanceSignal::DisturbanceSignal(const DisturbanceSpec& spec, int dim)
    : spec_(spec), dim_(dim) {
  if (dim < 1) throw InvalidInputError("DisturbanceSignal: dimension must be >= 1");
  if (spec.wbar < 0.0) throw InvalidInputError("DisturbanceSignal: negative bound");
  if (spec.kind == DisturbanceSpec::Kind::Uniform && !(spec.hold > 0.0))
    throw InvalidInputError("DisturbanceSignal: hold must be positive");

  if (spec.kind == DisturbanceSpec::Kind::Sinusoid) {
    // distinct irrational frequency ratios keep the channels incommensurate
    static const double ratios[] = {1.0, std::sqrt(2.0), std::sqrt(3.0),
                                    std::sqrt(5.0), std::sqrt(7.0), std::sqrt(11.0)};
    freq_ = Vec(dim);
    phase_ = Vec(dim);
    for (int i = 0; i < dim; ++i) {
      freq_[i] = spec.base_frequency * ratios[i % 6];
      phase_[i] = 0.4 + 0.9 * static_cast<double>(i);
    }
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_open(std::uint64_t bits) {  // (0, 1]
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

Vec DisturbanceSignal::operator()(double t) const {
  if (dim_ == 0 || spec_.wbar == 0.0 ||
      spec_.kind == DisturbanceSpec::Kind::Zero)
    return Vec::Zero(dim_);

  Vec w(dim_);
  switch (spec_.kind) {
    case DisturbanceSpec::Kind::Sinusoid: {
      const double amp = spec_.wbar / std::sqrt(static_cast<double>(dim_));
      for (int i = 0; i < dim_; ++i)
        w[i] = amp * std::sin(freq_[i] * t + phase_[i]);
      break;
    }
    case DisturbanceSpec::Kind::Uniform: {
      // counter-based stream: the draw depends only on (seed, window index),
      // so out-of-order queries from integrator stages stay consistent
      auto window = static_cast<std::int64_t>(std::floor(t / spec_.hold));
      std::uint64_t state =
          spec_.seed ^ (static_cast<std::uint64_t>(window) * 0xd1342543de82ef95ULL);
      splitmix(state);
      // gaussian direction, radius uniform in the ball
      for (int i = 0; i < dim_; ++i) {
        double u1 = unit_open(splitmix(state));
        double u2 = unit_open(splitmix(state));
        w[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      }
      double norm = w.norm();
      if (norm < 1e-300) {
        w.setZero();
        break;
      }
      double radius = spec_.wbar *
                      std::pow(unit_open(splitmix(state)),
                               1.0 / static_cast<double>(dim_));
      w *= radius / norm;
      break;
    }
    case DisturbanceSpec::Kind::Zero:
      break;
  }

  double norm = w.norm();
  if (norm > spec_.wbar) w *= spec_.wbar / norm;  // hard cap, defensive
  return w;
}

void integrate_closed_loop(const SystemModel& sys, const DisturbanceSignal& w,
                           const LoopHooks& hooks, const Vec& x0, double t0,
                           double t1, double dt, TrajectoryLog& log) {
  if (x0.size() != sys.n)
    throw InvalidInputError("integrate_closed_loop: initial state dimension mismatch");
  if (!(dt > 0.0) || !(t1 > t0))
    throw InvalidInputError("integrate_closed_loop: bad time window");
  if (!hooks.input)
    throw InvalidInputError("integrate_closed_loop: input hook required");
  const double span = t1 - t0;
  const auto steps = static_cast<long>(std::llround(span / dt));
  if (steps < 1 || std::abs(steps * dt - span) > 1e-9 * std::max(1.0, span))
    throw InvalidInputError("integrate_closed_loop: dt must divide the window");

  log.n = sys.n;
  Vec x = x0;

  auto eval_input = [&](const Vec& xx, double tt) {
    double u = hooks.input(xx, tt);
    if (!std::isfinite(u))
      throw NumericalError("integrate_closed_loop: controller returned a non-finite input at t=" +
                           std::to_string(tt));
    return u;
  };
  auto rhs = [&](const Vec& xx, double tt) {
    Vec dot = sys.drift(xx) + sys.input_dir(xx) * eval_input(xx, tt);
    Vec dist = w(tt);
    if (dist.size() == sys.n) {
      dot += dist;
    } else if (dist.size() != 0) {
      throw InvalidInputError("integrate_closed_loop: disturbance dimension mismatch");
    }
    return dot;
  };

  for (long i = 0; i <= steps; ++i) {
    double t = t0 + static_cast<double>(i) * dt;
    if (i == steps) t = t1;  // avoid accumulated grid drift at the end
    if (hooks.before_step && i < steps) hooks.before_step(x, t);

    double u_now = eval_input(x, t);
    log.t.push_back(t);
    log.x.push_back(x);
    log.u.push_back(u_now);
    SampleAnnotation ann;
    if (hooks.annotate) ann = hooks.annotate(x, t, u_now);
    log.x_ref.push_back(ann.x_ref.size() == sys.n ? ann.x_ref : Vec::Zero(sys.n));
    log.lyapunov.push_back(ann.lyapunov);
    log.state_ok.push_back(ann.state_ok ? 1 : 0);
    log.input_ok.push_back(ann.input_ok ? 1 : 0);
    log.planner_feasible.push_back(ann.planner_feasible ? 1 : 0);
    log.fallback_used.push_back(ann.fallback_used ? 1 : 0);
    log.bound_rhs.push_back(ann.bound_rhs);
    log.planned_input.push_back(ann.planned_input);

    if (i == steps) break;
    Vec k1 = rhs(x, t);
    Vec k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt);
    Vec k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt);
    Vec k4 = rhs(x + dt * k3, t + dt);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw NumericalError("integrate_closed_loop: state diverged at t=" +
                           std::to_string(t));
  }
}

}  // namespace cmpc

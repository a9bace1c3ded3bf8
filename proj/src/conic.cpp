#include "cmpc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace cmpc {

ConicProgram::ConicProgram(int vars) : num_vars(vars), q(Vec::Zero(vars)) {}

AffineRow ConicProgram::row(double offset) const {
  return AffineRow{Vec::Zero(num_vars), offset};
}

void ConicProgram::add_equality(AffineRow r) { equalities.push_back(std::move(r)); }

void ConicProgram::add_soc(SocConstraint c) { socs.push_back(std::move(c)); }

void ConicProgram::add_inequality(AffineRow r) {
  SocConstraint c;
  c.t = std::move(r);
  socs.push_back(std::move(c));
}

namespace {

void check_row(const AffineRow& r, int nvars, const char* what) {
  if (r.coeffs.size() != nvars)
    throw InvalidInputError(std::string("conic: ") + what + " row has wrong width");
  if (!r.coeffs.allFinite() || !std::isfinite(r.offset))
    throw InvalidInputError(std::string("conic: ") + what + " row has non-finite entries");
}

}  // namespace

void ConicProgram::validate() const {
  if (num_vars < 0) throw InvalidInputError("conic: negative variable count");
  if (q.size() != num_vars) throw InvalidInputError("conic: q has wrong size");
  if (!q.allFinite()) throw InvalidInputError("conic: q has non-finite entries");
  if (p.size() > 0) {
    if (p.rows() != num_vars || p.cols() != num_vars)
      throw InvalidInputError("conic: objective matrix has wrong shape");
    if (!p.allFinite()) throw InvalidInputError("conic: objective matrix non-finite");
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + p.cwiseAbs().maxCoeff()))
      throw InvalidInputError("conic: objective matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(p);
    double largest = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-8 * largest)
      throw InvalidInputError("conic: objective matrix not PSD");
  }
  for (const auto& eq : equalities) check_row(eq, num_vars, "equality");
  for (const auto& soc : socs) {
    check_row(soc.t, num_vars, "soc t");
    for (const auto& u : soc.u) check_row(u, num_vars, "soc u");
  }
  for (int idx : nonneg)
    if (idx < 0 || idx >= num_vars)
      throw InvalidInputError("conic: nonneg index out of range");
}

void ConicProgram::dump(std::ostream& os) const {
  os << "conic program: vars=" << num_vars << " eq=" << equalities.size()
     << " soc=" << socs.size() << " nonneg=" << nonneg.size() << "\n";
  os << "q:";
  for (int i = 0; i < q.size(); ++i) os << " " << q[i];
  os << "\n";
  if (p.size() > 0) {
    os << "P:\n" << p << "\n";
  }
  for (std::size_t i = 0; i < equalities.size(); ++i) {
    os << "eq[" << i << "]: " << equalities[i].coeffs.transpose() << " | "
       << equalities[i].offset << "\n";
  }
  for (std::size_t i = 0; i < socs.size(); ++i) {
    os << "soc[" << i << "] t: " << socs[i].t.coeffs.transpose() << " | "
       << socs[i].t.offset << "\n";
    for (std::size_t j = 0; j < socs[i].u.size(); ++j)
      os << "soc[" << i << "] u" << j << ": " << socs[i].u[j].coeffs.transpose()
         << " | " << socs[i].u[j].offset << "\n";
  }
  if (!nonneg.empty()) {
    os << "nonneg:";
    for (int idx : nonneg) os << " x" << idx;
    os << "\n";
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::PrimalInfeasible:
      return "PrimalInfeasible";
    case SolveStatus::IterationLimit:
      return "IterationLimit";
  }
  return "?";
}

Vec project_soc(const Vec& v) {
  if (v.size() < 1) throw InvalidInputError("project_soc: empty input");
  const double t = v[0];
  const double un = v.size() > 1 ? v.tail(v.size() - 1).norm() : 0.0;
  if (un <= t) return v;
  if (un <= -t) return Vec::Zero(v.size());
  Vec out(v.size());
  const double coef = 0.5 * (t + un);
  out[0] = coef;
  out.tail(v.size() - 1) = (coef / un) * v.tail(v.size() - 1);
  return out;
}

namespace {

enum class ConeKind { Zero, Soc, NonNeg };

struct ConeBlock {
  ConeKind kind;
  int start;
  int size;
};

struct Assembled {
  Mat a;
  Vec b;
  std::vector<ConeBlock> blocks;
  int m = 0;
};

Assembled assemble(const ConicProgram& prog) {
  Assembled out;
  int m = static_cast<int>(prog.equalities.size());
  for (const auto& soc : prog.socs) m += 1 + static_cast<int>(soc.u.size());
  m += static_cast<int>(prog.nonneg.size());
  out.m = m;
  out.a = Mat::Zero(m, prog.num_vars);
  out.b = Vec::Zero(m);

  // layout: all equalities (one zero-cone block), SOC blocks, nonneg tail.
  // convention: s = b - A x must land in the cone.
  int r = 0;
  if (!prog.equalities.empty()) {
    out.blocks.push_back({ConeKind::Zero, 0, static_cast<int>(prog.equalities.size())});
    for (const auto& eq : prog.equalities) {
      out.a.row(r) = eq.coeffs.transpose();
      out.b[r] = -eq.offset;
      ++r;
    }
  }
  for (const auto& soc : prog.socs) {
    const int size = 1 + static_cast<int>(soc.u.size());
    out.blocks.push_back({ConeKind::Soc, r, size});
    out.a.row(r) = -soc.t.coeffs.transpose();
    out.b[r] = soc.t.offset;
    ++r;
    for (const auto& u : soc.u) {
      out.a.row(r) = -u.coeffs.transpose();
      out.b[r] = u.offset;
      ++r;
    }
  }
  if (!prog.nonneg.empty()) {
    out.blocks.push_back({ConeKind::NonNeg, r, static_cast<int>(prog.nonneg.size())});
    for (int idx : prog.nonneg) {
      out.a(r, idx) = -1.0;
      ++r;
    }
  }
  return out;
}

// Projection onto the cone product K, block by block, in place.
void project_cone(const std::vector<ConeBlock>& blocks, Vec& v) {
  for (const auto& blk : blocks) {
    switch (blk.kind) {
      case ConeKind::Zero:
        v.segment(blk.start, blk.size).setZero();
        break;
      case ConeKind::Soc:
        v.segment(blk.start, blk.size) = project_soc(v.segment(blk.start, blk.size));
        break;
      case ConeKind::NonNeg:
        v.segment(blk.start, blk.size) = v.segment(blk.start, blk.size).cwiseMax(0.0);
        break;
    }
  }
}

// Inf-norm distance to the dual cone K^*. Zero-cone duals are free.
double dual_cone_distance(const std::vector<ConeBlock>& blocks, const Vec& y) {
  double dist = 0.0;
  for (const auto& blk : blocks) {
    switch (blk.kind) {
      case ConeKind::Zero:
        break;
      case ConeKind::Soc: {
        Vec seg = y.segment(blk.start, blk.size);
        dist = std::max(dist, (seg - project_soc(seg)).cwiseAbs().maxCoeff());
        break;
      }
      case ConeKind::NonNeg:
        dist = std::max(dist, std::max(0.0, (-y.segment(blk.start, blk.size)).maxCoeff()));
        break;
    }
  }
  return dist;
}

double limit_scaling(double s) {
  if (s < 1e-4) return 1.0;
  return std::min(s, 1e4);
}

struct Scaling {
  Vec d;  // row scaling
  Vec e;  // column scaling
  double c = 1.0;
};

// Ruiz equilibration of [P A^T; A 0]; SOC blocks share one row scalar so the
// cone geometry survives the scaling.
Scaling ruiz_equilibrate(Mat& p, Vec& q, Mat& a, Vec& b,
                         const std::vector<ConeBlock>& blocks, int iters) {
  const int n = static_cast<int>(a.cols());
  const int m = static_cast<int>(a.rows());
  Scaling s;
  s.d = Vec::Ones(m);
  s.e = Vec::Ones(n);

  for (int sweep = 0; sweep < iters; ++sweep) {
    Vec de = Vec::Ones(n);
    for (int j = 0; j < n; ++j) {
      double colnorm = 0.0;
      if (m > 0) colnorm = a.col(j).cwiseAbs().maxCoeff();
      colnorm = std::max(colnorm, p.col(j).cwiseAbs().maxCoeff());
      de[j] = 1.0 / std::sqrt(limit_scaling(colnorm));
    }
    p = de.asDiagonal() * p * de.asDiagonal();
    q = q.cwiseProduct(de);
    if (m > 0) a = a * de.asDiagonal();
    s.e = s.e.cwiseProduct(de);

    if (m > 0) {
      Vec rownorm(m);
      for (int i = 0; i < m; ++i) rownorm[i] = a.row(i).cwiseAbs().maxCoeff();
      for (const auto& blk : blocks) {
        if (blk.kind != ConeKind::Soc) continue;
        double blockmax = rownorm.segment(blk.start, blk.size).maxCoeff();
        rownorm.segment(blk.start, blk.size).setConstant(blockmax);
      }
      Vec dd(m);
      for (int i = 0; i < m; ++i) dd[i] = 1.0 / std::sqrt(limit_scaling(rownorm[i]));
      a = dd.asDiagonal() * a;
      b = b.cwiseProduct(dd);
      s.d = s.d.cwiseProduct(dd);
    }
  }

  double pnorm = 0.0;
  for (int j = 0; j < n; ++j) pnorm += p.col(j).cwiseAbs().maxCoeff();
  if (n > 0) pnorm /= n;
  double qnorm = q.size() > 0 ? q.cwiseAbs().maxCoeff() : 0.0;
  double cost = std::max(pnorm, qnorm);
  s.c = 1.0 / limit_scaling(cost);
  p *= s.c;
  q *= s.c;
  return s;
}

}  // namespace

SolveResult solve(const ConicProgram& prog, const SolveSettings& settings,
                  const Vec* warm_x, const Vec* warm_y) {
  prog.validate();
  const int n = prog.num_vars;

  Assembled sys = assemble(prog);
  const int m = sys.m;

  // originals for unscaled residual checks
  Mat p0 = prog.p.size() > 0 ? prog.p : Mat::Zero(n, n);
  const Vec q0 = prog.q;
  const Mat a0 = sys.a;
  const Vec b0 = sys.b;

  Mat p = p0;
  Vec q = q0;
  Mat a = sys.a;
  Vec b = sys.b;
  Scaling scal;
  if (settings.ruiz_iters > 0) {
    scal = ruiz_equilibrate(p, q, a, b, sys.blocks, settings.ruiz_iters);
  } else {
    scal.d = Vec::Ones(m);
    scal.e = Vec::Ones(n);
  }

  // per-row penalties: equalities get a much stiffer rho
  double rho_base = settings.rho;
  auto build_rho = [&](double base) {
    Vec rho = Vec::Constant(m, base);
    for (const auto& blk : sys.blocks)
      if (blk.kind == ConeKind::Zero)
        rho.segment(blk.start, blk.size).setConstant(base * 1e3);
    return rho;
  };
  Vec rho = build_rho(rho_base);

  auto factor_kkt = [&](const Vec& rho_vec) {
    Mat kkt = p + settings.sigma * Mat::Identity(n, n);
    if (m > 0) kkt += a.transpose() * rho_vec.asDiagonal() * a;
    return Eigen::LLT<Mat>(kkt);
  };
  Eigen::LLT<Mat> kkt = factor_kkt(rho);
  if (kkt.info() != Eigen::Success)
    throw NumericalError("conic: KKT factorization failed");

  Vec x = Vec::Zero(n);
  Vec y = Vec::Zero(m);
  if (warm_x && warm_x->size() == n) x = warm_x->cwiseQuotient(scal.e);
  if (warm_y && warm_y->size() == m) y = scal.c * warm_y->cwiseQuotient(scal.d);
  Vec z(m);
  if (m > 0) {
    z = b - (a * x);  // s-space guess
    project_cone(sys.blocks, z);
    z = b - z;
  }

  SolveResult result;
  Vec y_prev = y;
  int infeas_run = 0;

  auto unscale_x = [&](const Vec& xs) { return xs.cwiseProduct(scal.e).eval(); };
  auto unscale_y = [&](const Vec& ys) {
    return (ys.cwiseProduct(scal.d) / scal.c).eval();
  };

  int iter = 0;
  while (iter < settings.max_iter) {
    ++iter;
    y_prev = y;

    Vec rhs = settings.sigma * x - q;
    if (m > 0) rhs += a.transpose() * (rho.cwiseProduct(z) - y);
    Vec xt = kkt.solve(rhs);
    x = settings.relax_alpha * xt + (1.0 - settings.relax_alpha) * x;
    if (m > 0) {
      Vec zt = a * xt;
      Vec zpre = settings.relax_alpha * zt + (1.0 - settings.relax_alpha) * z;
      Vec v = zpre + y.cwiseQuotient(rho);
      // project onto C = b - K
      Vec w = b - v;
      project_cone(sys.blocks, w);
      Vec z_new = b - w;
      y = y + rho.cwiseProduct(zpre - z_new);
      z = z_new;
    }

    if (iter % settings.check_every != 0 && iter != settings.max_iter) continue;

    Vec xu = unscale_x(x);
    if (!xu.allFinite() || xu.cwiseAbs().maxCoeff() > 1e12) {
      result.detail = "iterates diverged";
      break;
    }

    Vec axu = a0 * xu;
    Vec zu = m > 0 ? (z.cwiseQuotient(scal.d)).eval() : Vec(0);
    Vec yu = m > 0 ? unscale_y(y) : Vec(0);
    double rp = m > 0 ? (axu - zu).cwiseAbs().maxCoeff() : 0.0;
    double scale_p = 0.0;
    if (m > 0)
      scale_p = std::max(axu.cwiseAbs().maxCoeff(), zu.cwiseAbs().maxCoeff());
    Vec grad = p0 * xu + q0;
    if (m > 0) grad += a0.transpose() * yu;
    double rd = grad.cwiseAbs().maxCoeff();
    double scale_d = std::max((p0 * xu).cwiseAbs().maxCoeff(), q0.cwiseAbs().maxCoeff());
    if (m > 0) scale_d = std::max(scale_d, (a0.transpose() * yu).cwiseAbs().maxCoeff());

    if (rp <= settings.eps_abs + settings.eps_rel * scale_p &&
        rd <= settings.eps_abs + settings.eps_rel * scale_d) {
      result.status = SolveStatus::Optimal;
      result.x = xu;
      result.y = yu;
      result.objective = 0.5 * xu.dot(p0 * xu) + q0.dot(xu);
      result.iterations = iter;
      result.primal_residual = rp;
      result.dual_residual = rd;
      return result;
    }

    // primal infeasibility certificate: A^T dy ~ 0, dy in K^*, b^T dy < 0
    if (m > 0) {
      Vec dy = unscale_y(y) - unscale_y(y_prev);
      double dynorm = dy.cwiseAbs().maxCoeff();
      if (dynorm > 1e-14) {
        Vec dyn = dy / dynorm;
        double e_stat = (a0.transpose() * dyn).cwiseAbs().maxCoeff();
        double e_cone = dual_cone_distance(sys.blocks, dyn);
        double e_obj = b0.dot(dyn);
        if (e_stat < settings.infeas_tol && e_cone < settings.infeas_tol &&
            e_obj < -settings.infeas_tol) {
          infeas_run += settings.check_every;
        } else {
          infeas_run = 0;
        }
        if (infeas_run >= settings.infeas_hold) {
          result.status = SolveStatus::PrimalInfeasible;
          result.x = xu;
          result.y = dy;
          result.iterations = iter;
          result.detail = "primal infeasibility certificate";
          return result;
        }
      }
    }

    // adaptive penalty: rebalance primal vs dual progress
    if (settings.adaptive_rho && m > 0) {
      double rel_p = rp / std::max(scale_p, 1e-12);
      double rel_d = rd / std::max(scale_d, 1e-12);
      double ratio = std::sqrt(rel_p / std::max(rel_d, 1e-16));
      if (ratio > 5.0 || ratio < 0.2) {
        rho_base = std::clamp(rho_base * ratio, 1e-6, 1e6);
        rho = build_rho(rho_base);
        kkt = factor_kkt(rho);
        if (kkt.info() != Eigen::Success)
          throw NumericalError("conic: KKT refactorization failed");
      }
    }
  }

  Vec xu = unscale_x(x);
  result.status = SolveStatus::IterationLimit;
  result.x = xu;
  result.y = m > 0 ? unscale_y(y) : Vec(0);
  result.objective = 0.5 * xu.dot(p0 * xu) + q0.dot(xu);
  result.iterations = iter;
  if (result.detail.empty()) result.detail = "iteration limit reached";
  return result;
}

}  // namespace cmpc

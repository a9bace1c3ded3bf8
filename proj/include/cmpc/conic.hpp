#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cmpc/types.hpp"

namespace cmpc {

// Affine expression a^T x + b over a program's variables.
struct AffineRow {
  Vec coeffs;
  double offset = 0.0;
};

// Second-order cone constraint ||u(x)|| <= t(x) over affine expressions.
// An empty u-list degenerates to the linear inequality t(x) >= 0.
struct SocConstraint {
  AffineRow t;
  std::vector<AffineRow> u;
};

// minimize 1/2 x^T P x + q^T x
// subject to each equality row e(x) = 0, each SOC constraint, and x_i >= 0
// for every index in nonneg.
struct ConicProgram {
  int num_vars = 0;
  Mat p;  // PSD; leave 0x0 for a pure LP
  Vec q;
  std::vector<AffineRow> equalities;
  std::vector<SocConstraint> socs;
  std::vector<int> nonneg;

  explicit ConicProgram(int vars = 0);

  AffineRow row(double offset = 0.0) const;  // zeroed coefficient template
  void add_equality(AffineRow r);
  void add_soc(SocConstraint c);
  void add_inequality(AffineRow r);  // r(x) >= 0, stored as an empty-u SOC

  // Sanity checks callers rely on: shapes agree, entries finite, P symmetric
  // PSD, nonneg indices in range. Throws InvalidInputError.
  void validate() const;

  // Plain-text dump: dimensions first, then objective and rows.
  void dump(std::ostream& os) const;
};

enum class SolveStatus { Optimal, PrimalInfeasible, IterationLimit };

const char* to_string(SolveStatus s);

struct SolveSettings {
  double eps_abs = 1e-7;
  double eps_rel = 1e-7;
  int max_iter = 50000;
  double rho = 0.1;          // base ADMM penalty (equalities get 1e3x)
  double sigma = 1e-6;       // x-regularization
  double relax_alpha = 1.6;  // over-relaxation
  int check_every = 25;      // residual/certificate check interval
  double infeas_tol = 1e-7;  // normalized certificate residual threshold
  int infeas_hold = 100;     // iterations the certificate must persist
  bool adaptive_rho = true;
  int ruiz_iters = 10;       // diagonal equilibration sweeps
};

struct SolveResult {
  SolveStatus status = SolveStatus::IterationLimit;
  Vec x;  // best primal iterate (the solution when Optimal)
  Vec y;  // duals for the assembled rows: equalities, SOC blocks, nonneg
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;  // unscaled, inf-norm
  double dual_residual = 0.0;
  std::string detail;  // extra info for non-Optimal outcomes
};

// Euclidean projection onto the second-order cone; v packs (t, u).
Vec project_soc(const Vec& v);

// Operator-splitting (ADMM) solve over the cone product {zero, SOC, nonneg}
// with diagonal Ruiz equilibration. Warm starts accept a previous primal
// (and optionally dual) iterate.
SolveResult solve(const ConicProgram& prog, const SolveSettings& settings = {},
                  const Vec* warm_x = nullptr, const Vec* warm_y = nullptr);

}  // namespace cmpc

#include "cmpc/numerics.hpp"

#include <cmath>

namespace cmpc {

namespace {

bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace

Mat mat_exp(const Mat& m) {
  if (m.rows() != m.cols()) throw InvalidInputError("mat_exp: matrix must be square");
  if (!all_finite(m)) throw InvalidInputError("mat_exp: non-finite entries");

  const int n = static_cast<int>(m.rows());
  // 1-norm decides the number of squarings; theta is the degree-6 Pade
  // accuracy radius.
  const double theta = 0.248;
  double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta)));
  }
  Mat a = m / std::pow(2.0, squarings);

  // Degree-6 diagonal Pade: p(A) = V + U, q(A) = V - U with U odd, V even.
  static const double b[] = {1.0,          1.0 / 2.0,     5.0 / 44.0, 1.0 / 66.0,
                             1.0 / 792.0,  1.0 / 15840.0, 1.0 / 665280.0};
  const Mat ident = Mat::Identity(n, n);
  Mat a2 = a * a;
  Mat a4 = a2 * a2;
  Mat a6 = a2 * a4;
  Mat u = a * (b[1] * ident + b[3] * a2 + b[5] * a4);
  Mat v = b[0] * ident + b[2] * a2 + b[4] * a4 + b[6] * a6;

  Eigen::PartialPivLU<Mat> lu(v - u);
  Mat result = lu.solve(v + u);
  if (!all_finite(result)) throw NumericalError("mat_exp: Pade solve failed");

  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

Mat solve_lyapunov(const Mat& f, const Mat& q) {
  if (f.rows() != f.cols() || q.rows() != q.cols() || f.rows() != q.rows())
    throw InvalidInputError("solve_lyapunov: dimension mismatch");
  if (!all_finite(f) || !all_finite(q))
    throw InvalidInputError("solve_lyapunov: non-finite entries");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + q.cwiseAbs().maxCoeff()))
    throw InvalidInputError("solve_lyapunov: Q must be symmetric");

  const int n = static_cast<int>(f.rows());
  Eigen::EigenSolver<Mat> es(f);
  if (es.eigenvalues().real().maxCoeff() >= 0.0)
    throw PreconditionError("solve_lyapunov: F must be Hurwitz");

  // vec(F^T P) = (I (x) F^T) vec(P), vec(P F) = (F^T (x) I) vec(P).
  Mat ft = f.transpose();
  Mat kron = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    kron.block(i * n, i * n, n, n) += ft;
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) kron(i * n + k, j * n + k) += ft(i, j);
    }
  }
  Vec rhs(n * n);
  for (int j = 0; j < n; ++j) rhs.segment(j * n, n) = -q.col(j);

  Eigen::FullPivLU<Mat> lu(kron);
  if (!lu.isInvertible()) throw NumericalError("solve_lyapunov: singular Kronecker system");
  Vec sol = lu.solve(rhs);

  Mat p(n, n);
  for (int j = 0; j < n; ++j) p.col(j) = sol.segment(j * n, n);
  // the exact solution is symmetric; fold roundoff back in
  p = 0.5 * (p + p.transpose()).eval();
  if (!all_finite(p)) throw NumericalError("solve_lyapunov: non-finite solution");
  return p;
}

PsdProjection psd_project_2x2(const Eigen::Matrix2d& m) {
  if (!m.allFinite()) throw InvalidInputError("psd_project_2x2: non-finite entries");
  if (std::abs(m(0, 1) - m(1, 0)) > 1e-9)
    throw InvalidInputError("psd_project_2x2: input not symmetric");

  const double a = m(0, 0);
  const double b = 0.5 * (m(0, 1) + m(1, 0));
  const double c = m(1, 1);
  const double mean = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);
  const double l1 = mean + radius;
  const double l2 = mean - radius;

  PsdProjection out;
  out.lambda1 = l1;
  // eigenvector for l1; pick the better-conditioned expression
  Eigen::Vector2d v;
  if (radius < 1e-300) {
    v = Eigen::Vector2d(1.0, 0.0);
  } else if (a - l2 >= l1 - a) {
    v = Eigen::Vector2d(a - l2, b);
  } else {
    v = Eigen::Vector2d(b, l1 - a);
  }
  if (v.norm() == 0.0) v = Eigen::Vector2d(1.0, 0.0);
  v.normalize();
  // orient so the entries are nonnegative when possible (they are for the
  // leading eigenvector of a matrix with nonnegative off-diagonal)
  if (v.sum() < 0.0) v = -v;
  out.v1 = v;

  if (l2 >= 0.0) {
    out.matrix = m;
    out.projected = false;
    return out;
  }
  Eigen::Matrix2d proj = std::max(l1, 0.0) * v * v.transpose();
  out.matrix = proj;
  out.projected = true;
  return out;
}

double ellipsoid_support(const Vec& l, const Mat& p, double level) {
  if (level < 0.0) throw InvalidInputError("ellipsoid_support: negative level");
  if (p.rows() != p.cols() || l.size() != p.rows())
    throw InvalidInputError("ellipsoid_support: dimension mismatch");
  Eigen::LLT<Mat> llt(0.5 * (p + p.transpose()));
  if (llt.info() != Eigen::Success)
    throw PreconditionError("ellipsoid_support: P must be positive definite");
  double quad = l.dot(llt.solve(l));
  return std::sqrt(level * std::max(quad, 0.0));
}

Mat psd_sqrt_factor_2x2(const Eigen::Matrix2d& m, double tol) {
  if (std::abs(m(0, 1) - m(1, 0)) > 1e-9)
    throw InvalidInputError("psd_sqrt_factor_2x2: input not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  const auto& vals = es.eigenvalues();  // ascending
  if (vals[0] < -tol * std::max(1.0, std::abs(vals[1])))
    throw PreconditionError("psd_sqrt_factor_2x2: matrix not PSD");
  int rank = 0;
  for (int i = 0; i < 2; ++i)
    if (vals[i] > tol * std::max(1.0, std::abs(vals[1]))) ++rank;
  Mat l(2, rank);
  int col = 0;
  for (int i = 1; i >= 0; --i) {  // largest first
    if (vals[i] > tol * std::max(1.0, std::abs(vals[1])))
      l.col(col++) = std::sqrt(vals[i]) * es.eigenvectors().col(i);
  }
  return l;
}

}  // namespace cmpc

#pragma once

#include <Eigen/Dense>

#include "cmpc/types.hpp"

namespace cmpc {

// Matrix exponential by scaling-and-squaring with a degree-6 diagonal Pade
// approximant. Accurate to ~1e-12 relative error for ||M||_1 up to ~10.
Mat mat_exp(const Mat& m);

// Solves F^T P + P F = -Q for symmetric P via the Kronecker-product linear
// system. Requires F Hurwitz and Q symmetric positive definite.
Mat solve_lyapunov(const Mat& f, const Mat& q);

struct PsdProjection {
  Eigen::Matrix2d matrix;    // nearest PSD matrix in Frobenius norm
  double lambda1 = 0.0;      // largest eigenvalue of the input
  Eigen::Vector2d v1;        // its unit eigenvector
  bool projected = false;    // true when a negative eigenvalue was clipped
};

// Projects a symmetric 2x2 matrix onto the PSD cone by clipping negative
// eigenvalues. Off-diagonal mismatch up to 1e-9 is tolerated and symmetrized
// away; anything larger is rejected.
PsdProjection psd_project_2x2(const Eigen::Matrix2d& m);

// Support function of the ellipsoid {v : v^T P v <= level} in direction l,
// i.e. sqrt(level * l^T P^{-1} l). P must be symmetric positive definite.
double ellipsoid_support(const Vec& l, const Mat& p, double level);

// Cholesky-style factor L with L L^T = M for a PSD 2x2 matrix, handling the
// rank-deficient cases: returns a 2x0, 2x1 or 2x2 matrix depending on rank
// (eigenvalues below tol count as zero).
Mat psd_sqrt_factor_2x2(const Eigen::Matrix2d& m, double tol = 1e-12);

}  // namespace cmpc

#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cmpc/types.hpp"

namespace test_util {

// Small deterministic RNG so expected values stay frozen across platforms.
// splitmix64 state update, top 53 bits mapped to [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  cmpc::Vec vector(int n, double lo = -1.0, double hi = 1.0) {
    cmpc::Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  cmpc::Mat matrix(int rows, int cols, double lo = -1.0, double hi = 1.0) {
    cmpc::Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

  // Random Hurwitz matrix: shift a random matrix left of the imaginary axis.
  cmpc::Mat hurwitz(int n, double margin = 0.2) {
    cmpc::Mat m = matrix(n, n);
    double shift = m.eigenvalues().real().maxCoeff();
    m -= (shift + margin) * cmpc::Mat::Identity(n, n);
    return m;
  }

 private:
  std::uint64_t state_;
};

}  // namespace test_util

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "distdyn/core/types.hpp"

namespace distdyn {

// Gaussian kernel k(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
inline double gauss_kernel(double sigma, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw InputError("gauss_kernel: dimension mismatch");
  if (!(sigma > 0.0)) throw InputError("gauss_kernel: sigma must be > 0");
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

struct KernelSpec {
  double bandwidth = 1.0;
  Eigen::Index dimension = 1;

  void validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw InputError("KernelSpec: bandwidth must be finite and > 0");
    if (dimension < 1) throw InputError("KernelSpec: dimension must be >= 1");
  }
};

inline double gauss_kernel(const KernelSpec& spec, const Vector& x,
                           const Vector& y) {
  spec.validate();
  if (x.size() != spec.dimension)
    throw InputError("gauss_kernel: dimension mismatch");
  return gauss_kernel(spec.bandwidth, x, y);
}

// Median of the N(N-1)/2 pairwise Euclidean distances (self-pairs excluded).
// Even pair counts take the midpoint of the two central order statistics.
inline double median_heuristic(const Matrix& sample) {
  const Eigen::Index n = sample.rows();
  if (n < 2) throw InputError("median_heuristic: need N >= 2");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((sample.row(i) - sample.row(j)).norm());
  const std::size_t m = dists.size();
  auto mid = dists.begin() + m / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  double med = *mid;
  if (m % 2 == 0) {
    auto lo = std::max_element(dists.begin(), dists.begin() + m / 2);
    med = 0.5 * (med + *lo);
  }
  if (!(med > 0.0))
    throw InputError("median_heuristic: degenerate sample: zero median distance");
  return med;
}

// Biased MMD^2 V-statistic (diagonal terms included):
//   mean(K_AA) + mean(K_BB) - 2 mean(K_AB).
inline double empirical_mmd2(double sigma, const Matrix& a, const Matrix& b) {
  if (a.rows() < 1 || b.rows() < 1) throw InputError("empirical_mmd2: empty sample");
  if (a.cols() != b.cols()) throw InputError("empirical_mmd2: dimension mismatch");
  const double inv = -1.0 / (2.0 * sigma * sigma);
  auto block_mean = [inv](const Matrix& x, const Matrix& y) {
    // |x_i - y_j|^2 = |x_i|^2 + |y_j|^2 - 2 x_i . y_j, computed blockwise.
    Vector xs = x.rowwise().squaredNorm();
    Vector ys = y.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * x * y.transpose()).colwise() + xs;
    d2.rowwise() += ys.transpose();
    return (d2 * inv).array().exp().mean();
  };
  double v = block_mean(a, a) + block_mean(b, b) - 2.0 * block_mean(a, b);
  return std::max(v, 0.0);
}

}  // namespace distdyn

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "distdyn/core/types.hpp"
#include "distdyn/inference/curves.hpp"

namespace distdyn {

struct BarycenterDensity {
  Vector grid;     // bin centers
  Vector density;  // histogram-smoothed density values (integrates to ~1)
  Vector barycenter_sample;  // averaged quantile values
};

// 1-D Wasserstein barycenter of empirical samples: average the per-sample
// quantile functions on a uniform probability grid, then histogram-smooth
// the resulting barycenter sample into a density on `grid_size` bins.
inline BarycenterDensity wasserstein1d_barycenter(
    const std::vector<Vector>& samples, int grid_size, int prob_points = 1000) {
  if (samples.empty())
    throw InputError("wasserstein1d_barycenter: no samples given");
  if (grid_size < 1)
    throw InputError("wasserstein1d_barycenter: grid size must be >= 1");
  for (const Vector& s : samples)
    if (s.size() < 1)
      throw InputError("wasserstein1d_barycenter: empty sample");

  Vector bary = Vector::Zero(prob_points);
  std::vector<double> buffer;
  for (const Vector& s : samples) {
    buffer.assign(s.data(), s.data() + s.size());
    std::sort(buffer.begin(), buffer.end());
    for (int i = 0; i < prob_points; ++i) {
      const double prob =
          (static_cast<double>(i) + 0.5) / static_cast<double>(prob_points);
      const double h = prob * static_cast<double>(buffer.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, buffer.size() - 1);
      const double frac = h - std::floor(h);
      bary[i] += buffer[lo] * (1.0 - frac) + buffer[hi] * frac;
    }
  }
  bary /= static_cast<double>(samples.size());

  const double lo = bary.minCoeff();
  const double hi = bary.maxCoeff();
  const double span = std::max(hi - lo, 1e-12);
  const double width = span / static_cast<double>(grid_size);

  BarycenterDensity out;
  out.barycenter_sample = bary;
  out.grid = Vector(grid_size);
  out.density = Vector::Zero(grid_size);
  for (int b = 0; b < grid_size; ++b)
    out.grid[b] = lo + (static_cast<double>(b) + 0.5) * width;
  for (Eigen::Index i = 0; i < bary.size(); ++i) {
    int b = static_cast<int>((bary[i] - lo) / width);
    b = std::clamp(b, 0, grid_size - 1);
    out.density[b] += 1.0;
  }
  out.density /= static_cast<double>(bary.size()) * width;
  return out;
}

// Multivariate entry point: only d = 1 is supported.
inline BarycenterDensity wasserstein1d_barycenter(
    const std::vector<Matrix>& samples, int grid_size) {
  std::vector<Vector> cols;
  cols.reserve(samples.size());
  for (const Matrix& s : samples) {
    if (s.cols() != 1)
      throw InputError(
          "wasserstein1d_barycenter: unsupported for d != 1 samples");
    cols.push_back(s.col(0));
  }
  return wasserstein1d_barycenter(cols, grid_size);
}

}  // namespace distdyn

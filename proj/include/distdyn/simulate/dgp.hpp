#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "distdyn/core/types.hpp"

namespace distdyn {

// Time-varying three-component benchmark process: equal weights, means
// m_1(t) = -2 + 20t, m_2(t) = 16t, m_3(t) = 5 + 6t (identical coordinates
// for d >= 2), covariance sigma^2(t) Id with sigma^2(t) = 1 + t.
inline Vector dgp_component_means(double t) {
  Vector m(3);
  m[0] = -2.0 + 20.0 * t;
  m[1] = 16.0 * t;
  m[2] = 5.0 + 6.0 * t;
  return m;
}

inline double dgp_sigma2(double t) { return 1.0 + t; }

inline double dgp_density(int d, double t, const Vector& x) {
  if (x.size() != d) throw InputError("dgp_density: x has wrong dimension");
  const Vector means = dgp_component_means(t);
  const double s2 = dgp_sigma2(t);
  const double norm =
      std::pow(2.0 * M_PI * s2, -0.5 * static_cast<double>(d));
  double acc = 0.0;
  for (int s = 0; s < 3; ++s) {
    const double q = (x.array() - means[s]).square().sum();
    acc += norm * std::exp(-q / (2.0 * s2));
  }
  return acc / 3.0;
}

inline Matrix dgp_sample(int d, double t, int n, std::uint64_t seed) {
  if (d < 1 || n < 1) throw InputError("dgp_sample: d >= 1 and n >= 1 required");
  Rng rng(seed);
  const Vector means = dgp_component_means(t);
  const double sd = std::sqrt(dgp_sigma2(t));
  Matrix out(n, d);
  for (int i = 0; i < n; ++i) {
    const double m = means[static_cast<Eigen::Index>(rng.uniform_int(3))];
    for (int j = 0; j < d; ++j) out(i, j) = m + sd * rng.normal();
  }
  return out;
}

// The same process expressed through the generic mixture types, for
// cross-checking dgp_density against mixture_density.
inline GaussianDictionary dgp_dictionary(int d, double t) {
  const Vector means = dgp_component_means(t);
  const double sd = std::sqrt(dgp_sigma2(t));
  GaussianDictionary dict;
  dict.components.resize(3);
  for (int s = 0; s < 3; ++s) {
    dict.components[static_cast<std::size_t>(s)].mean =
        Vector::Constant(d, means[s]);
    dict.components[static_cast<std::size_t>(s)].cholesky =
        sd * Matrix::Identity(d, d);
  }
  return dict;
}

inline SnapshotDataset dgp_dataset(int d, const std::vector<double>& grid,
                                   int n, std::uint64_t seed) {
  SnapshotDataset data;
  data.grid.points = grid;
  data.grid.horizon = grid.empty() ? 1.0 : grid.back();
  if (data.grid.horizon <= 0.0) data.grid.horizon = 1.0;
  data.snapshots.reserve(grid.size());
  Rng master(seed);
  for (double t : grid) {
    const Vector means = dgp_component_means(t);
    const double sd = std::sqrt(dgp_sigma2(t));
    Matrix x(n, d);
    for (int i = 0; i < n; ++i) {
      const double m = means[static_cast<Eigen::Index>(master.uniform_int(3))];
      for (int j = 0; j < d; ++j) x(i, j) = m + sd * master.normal();
    }
    data.snapshots.push_back(std::move(x));
  }
  data.validate();
  return data;
}

}  // namespace distdyn

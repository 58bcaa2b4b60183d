#pragma once

// Shared fixtures and builders for the test suite.

#include <vector>

#include "distdyn/core/rng.hpp"
#include "distdyn/core/types.hpp"

namespace testsupport {

using distdyn::GaussianComponent;
using distdyn::GaussianDictionary;
using distdyn::Matrix;
using distdyn::Rng;
using distdyn::SimplexVector;
using distdyn::Vector;

inline GaussianComponent make_component(std::initializer_list<double> mean,
                                        std::initializer_list<double> cov) {
  GaussianComponent c;
  const Eigen::Index d = static_cast<Eigen::Index>(mean.size());
  c.mean = Vector(d);
  Eigen::Index i = 0;
  for (double v : mean) c.mean[i++] = v;
  Matrix m(d, d);
  i = 0;
  for (double v : cov) {
    m(i / d, i % d) = v;
    ++i;
  }
  return GaussianComponent::from_covariance(c.mean, m);
}

// Calibrated bivariate five-component glucose/rate dictionary.
inline GaussianDictionary bivariate_reference_dictionary() {
  GaussianDictionary dict;
  dict.components.push_back(make_component(
      {90.74, -0.0081}, {194.95, -0.1161, -0.1161, 0.9723}));
  dict.components.push_back(make_component(
      {129.24, -0.0152}, {129.48, 0.0554, 0.0554, 1.0150}));
  dict.components.push_back(make_component(
      {173.03, -0.0165}, {194.27, -0.4217, -0.4217, 1.6905}));
  dict.components.push_back(make_component(
      {229.53, 0.0902}, {367.18, 0.0451, 0.0451, 5.8084}));
  dict.components.push_back(make_component(
      {305.20, -0.1327}, {889.62, 7.1861, 7.1861, 5.4221}));
  return dict;
}

// Calibrated univariate three-component glucose dictionary.
inline GaussianDictionary univariate_reference_dictionary() {
  GaussianDictionary dict;
  dict.components.push_back(make_component({109.38}, {421.86}));
  dict.components.push_back(make_component({178.38}, {613.47}));
  dict.components.push_back(make_component({275.16}, {1692.82}));
  return dict;
}

// Random SPD covariance with eigenvalues in [lo, hi].
inline Matrix random_covariance(Rng& rng, int d, double lo = 0.1,
                                double hi = 10.0) {
  Vector eig(d);
  for (int i = 0; i < d; ++i) eig[i] = lo + (hi - lo) * rng.uniform();
  if (d == 1) return eig.asDiagonal();
  // random orthogonal basis via Gram-Schmidt on Gaussian columns
  Matrix g(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  return q * eig.asDiagonal() * q.transpose();
}

inline GaussianDictionary random_dictionary(Rng& rng, int k, int d,
                                            double mean_span = 3.0,
                                            double eig_lo = 0.1,
                                            double eig_hi = 10.0) {
  GaussianDictionary dict;
  for (int s = 0; s < k; ++s) {
    GaussianComponent c;
    c.mean = Vector(d);
    for (int q = 0; q < d; ++q)
      c.mean[q] = -mean_span + 2.0 * mean_span * rng.uniform();
    c.cholesky = Eigen::LLT<Matrix>(random_covariance(rng, d, eig_lo, eig_hi))
                     .matrixL();
    dict.components.push_back(std::move(c));
  }
  return dict;
}

inline SimplexVector random_simplex(Rng& rng, int k) {
  Vector w(k);
  for (int s = 0; s < k; ++s) w[s] = 0.05 + rng.uniform();
  return SimplexVector::from(w / w.sum());
}

}  // namespace testsupport

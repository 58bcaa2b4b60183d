#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include "distdyn/core/types.hpp"
#include "distdyn/simulate/dgp.hpp"

namespace distdyn {

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

using DensityFn = std::function<double(const Vector&)>;

// Uniform Monte-Carlo estimate of the squared L2 distance over an axis-
// aligned box [lo, hi]^d.
inline McEstimate l2_error_box(const DensityFn& predicted,
                               const DensityFn& truth, int d, double lo,
                               double hi, long mc_points, std::uint64_t seed) {
  if (mc_points < 2) throw InputError("l2_error_box: need >= 2 points");
  if (!(hi > lo)) throw InputError("l2_error_box: empty box");
  Rng rng(seed);
  const double volume = std::pow(hi - lo, d);
  double sum = 0.0, sum2 = 0.0;
  Vector x(d);
  for (long i = 0; i < mc_points; ++i) {
    for (int j = 0; j < d; ++j) x[j] = rng.uniform(lo, hi);
    const double diff = predicted(x) - truth(x);
    const double g = diff * diff;
    sum += g;
    sum2 += g * g;
  }
  const double n = static_cast<double>(mc_points);
  const double mean = sum / n;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  McEstimate out;
  out.value = volume * mean;
  out.se = volume * std::sqrt(var / n);
  return out;
}

// Bounding box covering every benchmark-process component mean +- 6 sigma(t).
inline void dgp_bounding_box(double t, double* lo, double* hi) {
  const Vector means = dgp_component_means(t);
  const double sd = std::sqrt(dgp_sigma2(t));
  *lo = means.minCoeff() - 6.0 * sd;
  *hi = means.maxCoeff() + 6.0 * sd;
}

inline McEstimate l2_error(const DensityFn& predicted, const DensityFn& truth,
                           int d, double t, long mc_points,
                           std::uint64_t seed) {
  double lo, hi;
  dgp_bounding_box(t, &lo, &hi);
  return l2_error_box(predicted, truth, d, lo, hi, mc_points, seed);
}

// Defensive importance sampling for higher dimensions, where the uniform-box
// estimator's variance explodes: q = 0.5 * f_t + 0.5 * uniform(box), with
// f_t the benchmark process density at time t (sampled exactly).
inline McEstimate l2_error_dgp_is(const DensityFn& predicted, int d, double t,
                                  long mc_points, std::uint64_t seed) {
  if (mc_points < 2) throw InputError("l2_error_dgp_is: need >= 2 points");
  double lo, hi;
  dgp_bounding_box(t, &lo, &hi);
  const double volume = std::pow(hi - lo, d);
  const double u_density = 1.0 / volume;
  Rng rng(seed);
  const Vector means = dgp_component_means(t);
  const double sd = std::sqrt(dgp_sigma2(t));
  double sum = 0.0, sum2 = 0.0;
  Vector x(d);
  for (long i = 0; i < mc_points; ++i) {
    if (rng.uniform() < 0.5) {
      const double m = means[static_cast<Eigen::Index>(rng.uniform_int(3))];
      for (int j = 0; j < d; ++j) x[j] = m + sd * rng.normal();
    } else {
      for (int j = 0; j < d; ++j) x[j] = rng.uniform(lo, hi);
    }
    bool inside = true;
    for (int j = 0; j < d; ++j)
      if (x[j] < lo || x[j] > hi) {
        inside = false;
        break;
      }
    const double f = dgp_density(d, t, x);
    const double q = 0.5 * f + (inside ? 0.5 * u_density : 0.0);
    const double diff = predicted(x) - f;
    const double g = diff * diff / q;
    sum += g;
    sum2 += g * g;
  }
  const double n = static_cast<double>(mc_points);
  const double mean = sum / n;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  McEstimate out;
  out.value = mean;
  out.se = std::sqrt(var / n);
  return out;
}

}  // namespace distdyn

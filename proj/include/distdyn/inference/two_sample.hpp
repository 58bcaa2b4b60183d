#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "distdyn/core/types.hpp"
#include "distdyn/kernel/kernel.hpp"

namespace distdyn {

enum class TestMethod { Wild, Permutation };

inline std::string test_method_name(TestMethod m) {
  return m == TestMethod::Wild ? "wild" : "permutation";
}

inline TestMethod test_method_from_name(const std::string& name) {
  if (name == "wild") return TestMethod::Wild;
  if (name == "permutation") return TestMethod::Permutation;
  throw InputError("unknown test method: " + name);
}

struct TestResult {
  int component = 0;
  int time_index = 0;
  double time = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  int b = 0;
  TestMethod method = TestMethod::Wild;
  std::uint64_t seed = 0;
};

namespace detail {

inline Matrix scalar_kernel_matrix(const Vector& pooled, double sigma) {
  const Eigen::Index n = pooled.size();
  Matrix k(n, n);
  const double inv = -1.0 / (2.0 * sigma * sigma);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = pooled[i] - pooled[j];
      k(i, j) = std::exp(inv * d * d);
    }
  return k;
}

}  // namespace detail

// Median-heuristic bandwidth on the pooled scalar sample.
inline double pooled_bandwidth(const Vector& x, const Vector& y) {
  Matrix pooled(x.size() + y.size(), 1);
  pooled.col(0).head(x.size()) = x;
  pooled.col(0).tail(y.size()) = y;
  return median_heuristic(pooled);
}

// T = (n0 n1 / n) * MMD^2 in V-statistic form; symmetric in (x, y).
inline double two_sample_statistic(const Vector& x, const Vector& y,
                                   double sigma) {
  if (x.size() < 2 || y.size() < 2)
    throw InputError("two_sample_statistic: need n0, n1 >= 2");
  if (!(sigma > 0.0)) throw InputError("two_sample_statistic: sigma must be > 0");
  const Eigen::Index n0 = x.size(), n1 = y.size(), n = n0 + n1;
  Vector pooled(n);
  pooled.head(n0) = x;
  pooled.tail(n1) = y;
  const Matrix k = detail::scalar_kernel_matrix(pooled, sigma);
  Vector c(n);
  c.head(n0).setConstant(1.0 / static_cast<double>(n0));
  c.tail(n1).setConstant(-1.0 / static_cast<double>(n1));
  const double mmd2 = std::max(0.0, c.dot(k * c));
  return (static_cast<double>(n0) * static_cast<double>(n1) /
          static_cast<double>(n)) *
         mmd2;
}

// Multiplier (wild) bootstrap: replicate coefficients are c_i scaled by
// i.i.d. Rademacher draws, evaluated on the doubly-centered pooled kernel
// matrix. Replicate b's stream depends only on (seed, component, time, b).
inline TestResult wild_bootstrap_pvalue(const Vector& x, const Vector& y,
                                        double sigma, int B,
                                        std::uint64_t seed, int component = 0,
                                        int time_index = 0) {
  if (B < 100) throw InputError("wild_bootstrap_pvalue: B >= 100 required");
  const Eigen::Index n0 = x.size(), n1 = y.size(), n = n0 + n1;
  const double t_obs = two_sample_statistic(x, y, sigma);

  Vector pooled(n);
  pooled.head(n0) = x;
  pooled.tail(n1) = y;
  const Matrix k = detail::scalar_kernel_matrix(pooled, sigma);
  // Double centering: K~ = H K H with H = I - (1/n) 1 1^T.
  const Vector row_mean = k.rowwise().mean();
  const double grand = row_mean.mean();
  Matrix kc = k;
  kc.colwise() -= row_mean;
  kc.rowwise() -= row_mean.transpose();
  kc.array() += grand;

  Vector c(n);
  c.head(n0).setConstant(1.0 / static_cast<double>(n0));
  c.tail(n1).setConstant(-1.0 / static_cast<double>(n1));
  const double scale = static_cast<double>(n0) * static_cast<double>(n1) /
                       static_cast<double>(n);

  int count = 0;
  Vector cb(n);
  for (int b = 0; b < B; ++b) {
    Rng rng(counter_hash(seed, static_cast<std::uint64_t>(component),
                         static_cast<std::uint64_t>(time_index),
                         static_cast<std::uint64_t>(b)));
    for (Eigen::Index i = 0; i < n; ++i) cb[i] = rng.rademacher() * c[i];
    const double t_star = scale * std::max(0.0, cb.dot(kc * cb));
    if (t_star >= t_obs) ++count;
  }

  TestResult r;
  r.component = component;
  r.time_index = time_index;
  r.statistic = t_obs;
  r.p_value = static_cast<double>(count) / static_cast<double>(B);
  r.b = B;
  r.method = TestMethod::Wild;
  r.seed = seed;
  return r;
}

// Label-permutation null with the same p-value formula.
inline TestResult permutation_pvalue(const Vector& x, const Vector& y,
                                     double sigma, int B, std::uint64_t seed,
                                     int component = 0, int time_index = 0) {
  if (B < 100) throw InputError("permutation_pvalue: B >= 100 required");
  const Eigen::Index n0 = x.size(), n1 = y.size(), n = n0 + n1;
  const double t_obs = two_sample_statistic(x, y, sigma);

  Vector pooled(n);
  pooled.head(n0) = x;
  pooled.tail(n1) = y;
  const Matrix k = detail::scalar_kernel_matrix(pooled, sigma);
  const double scale = static_cast<double>(n0) * static_cast<double>(n1) /
                       static_cast<double>(n);

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  Vector c(n);
  int count = 0;
  for (int b = 0; b < B; ++b) {
    Rng rng(counter_hash(seed, static_cast<std::uint64_t>(component),
                         static_cast<std::uint64_t>(time_index),
                         static_cast<std::uint64_t>(b)));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const Eigen::Index j = static_cast<Eigen::Index>(
          rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      c[idx[static_cast<std::size_t>(i)]] =
          (i < n0) ? 1.0 / static_cast<double>(n0)
                   : -1.0 / static_cast<double>(n1);
    const double t_star = scale * std::max(0.0, c.dot(k * c));
    if (t_star >= t_obs) ++count;
  }

  TestResult r;
  r.component = component;
  r.time_index = time_index;
  r.statistic = t_obs;
  r.p_value = static_cast<double>(count) / static_cast<double>(B);
  r.b = B;
  r.method = TestMethod::Permutation;
  r.seed = seed;
  return r;
}

}  // namespace distdyn

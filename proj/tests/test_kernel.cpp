#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "distdyn/core/rng.hpp"
#include "distdyn/kernel/kernel.hpp"

using namespace distdyn;
using Catch::Approx;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

// Exhaustive pairwise-distance median, written independently of the library:
// sort all n(n-1)/2 distances; even counts take the midpoint of the two
// central order statistics.
double median_oracle(const Matrix& sample) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < sample.rows(); ++i)
    for (Eigen::Index j = i + 1; j < sample.rows(); ++j)
      d.push_back((sample.row(i) - sample.row(j)).norm());
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  if (m % 2 == 1) return d[m / 2];
  return 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

}  // namespace

TEST_CASE("gauss_kernel closed-form values", "[kernel]") {
  Vector x0 = Vector::Zero(1), x1 = Vector::Constant(1, 1.0);
  REQUIRE(gauss_kernel(1.0, x0, x0) == 1.0);
  REQUIRE(gauss_kernel(1.0, x0, x1) == Approx(std::exp(-0.5)).epsilon(1e-12));
  REQUIRE(gauss_kernel(1.0, x0, x1) == Approx(0.606531).margin(1e-6));

  Vector a = Vector::Zero(2), b(2);
  b << 2.0, 0.0;
  REQUIRE(gauss_kernel(2.0, a, b) == Approx(std::exp(-0.5)).epsilon(1e-12));

  // symmetry on random inputs
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Vector u(3), v(3);
    for (int q = 0; q < 3; ++q) {
      u[q] = rng.normal();
      v[q] = rng.normal();
    }
    const double s = 0.5 + rng.uniform();
    REQUIRE(gauss_kernel(s, u, v) == gauss_kernel(s, v, u));
    REQUIRE(gauss_kernel(s, u, v) > 0.0);
    REQUIRE(gauss_kernel(s, u, v) <= 1.0);
  }

  REQUIRE_THROWS_AS(gauss_kernel(1.0, Vector::Zero(2), Vector::Zero(3)),
                    InputError);
  REQUIRE_THROWS_AS(gauss_kernel(0.0, x0, x0), InputError);
}

TEST_CASE("gauss_kernel via KernelSpec validates its inputs", "[kernel]") {
  KernelSpec spec;
  spec.bandwidth = 1.0;
  spec.dimension = 1;
  Vector x0 = Vector::Zero(1), x1 = Vector::Constant(1, 1.0);
  REQUIRE(gauss_kernel(spec, x0, x1) == gauss_kernel(1.0, x0, x1));
  spec.bandwidth = -1.0;
  REQUIRE_THROWS_AS(gauss_kernel(spec, x0, x1), InputError);
  spec.bandwidth = 1.0;
  spec.dimension = 2;
  REQUIRE_THROWS_AS(gauss_kernel(spec, x0, x1), InputError);
}

TEST_CASE("median_heuristic on small hand cases", "[kernel]") {
  REQUIRE(median_heuristic(column({0, 1, 3})) == Approx(2.0).epsilon(1e-15));
  REQUIRE(median_heuristic(column({0, 1})) == Approx(1.0).epsilon(1e-15));
  // four points -> six pairwise distances, even count -> midpoint rule
  const Matrix pts = column({0, 1, 2, 4});
  REQUIRE(median_heuristic(pts) == Approx(median_oracle(pts)).epsilon(1e-15));
}

TEST_CASE("median_heuristic rejects degenerate samples", "[kernel]") {
  Matrix same = Matrix::Constant(5, 1, 3.0);
  REQUIRE_THROWS_WITH(median_heuristic(same),
                      Catch::Matchers::ContainsSubstring("degenerate sample"));
  REQUIRE_THROWS_AS(median_heuristic(Matrix::Zero(1, 1)), InputError);
}

TEST_CASE("median_heuristic matches the exhaustive oracle on Gaussian data",
          "[kernel]") {
  Rng rng(11);
  Matrix sample(100, 1);
  for (int i = 0; i < 100; ++i) sample(i, 0) = rng.normal();
  const double sigma = median_heuristic(sample);
  REQUIRE(sigma == Approx(median_oracle(sample)).epsilon(1e-15));
  REQUIRE(sigma >= 0.8);
  REQUIRE(sigma <= 1.6);

  // a few multivariate samples too
  for (int t = 0; t < 5; ++t) {
    Matrix m(30, 2);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = rng.normal();
    REQUIRE(median_heuristic(m) == Approx(median_oracle(m)).epsilon(1e-15));
  }
}

TEST_CASE("empirical_mmd2 basic identities", "[kernel]") {
  const Matrix a = column({0.0});
  const Matrix b = column({1.0});
  const double v = empirical_mmd2(1.0, a, b);
  REQUIRE(v == Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-12));
  REQUIRE(v == Approx(0.786939).margin(1e-6));

  // identical point sets -> exactly zero
  const Matrix s = column({0.3, -1.2, 2.0});
  REQUIRE(empirical_mmd2(1.0, s, s) == 0.0);

  // symmetry, exact
  Rng rng(4);
  Matrix x(8, 2), y(5, 2);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) y(i, j) = rng.normal();
  REQUIRE(empirical_mmd2(1.3, x, y) == empirical_mmd2(1.3, y, x));
  REQUIRE(empirical_mmd2(1.3, x, y) >= 0.0);

  // invariance under row reordering
  Matrix xr = x;
  xr.row(0).swap(xr.row(7));
  xr.row(2).swap(xr.row(4));
  REQUIRE(empirical_mmd2(1.3, xr, y) ==
          Approx(empirical_mmd2(1.3, x, y)).epsilon(1e-12));

  REQUIRE_THROWS_AS(empirical_mmd2(1.0, Matrix(0, 1), y), InputError);
}

TEST_CASE("empirical_mmd2 under the null sits inside its permutation bulk",
          "[kernel]") {
  // Two same-distribution samples: the observed statistic should fall below
  // the 99th percentile of its label-permutation null in almost all trials.
  Rng rng(909);
  const int n = 500;
  const int trials = 100;
  const int perms = 100;
  int inside = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Matrix pooled(2 * n, 1);
    for (int i = 0; i < 2 * n; ++i) pooled(i, 0) = rng.normal();
    const double observed =
        empirical_mmd2(1.0, pooled.topRows(n), pooled.bottomRows(n));

    // Gram-based recomputation (oracle wiring check):
    // mmd2 = c' K c with c = +1/n on the first block, -1/n on the second.
    Matrix gram(2 * n, 2 * n);
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        const double diff = pooled(i, 0) - pooled(j, 0);
        gram(i, j) = std::exp(-0.5 * diff * diff);
      }
    Vector c(2 * n);
    for (int i = 0; i < 2 * n; ++i) c[i] = (i < n ? 1.0 : -1.0) / n;
    REQUIRE(c.dot(gram * c) == Approx(observed).margin(1e-10));

    std::vector<int> idx(2 * n);
    for (int i = 0; i < 2 * n; ++i) idx[i] = i;
    std::vector<double> null_vals(perms);
    for (int p = 0; p < perms; ++p) {
      for (int i = 2 * n - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
      Vector cp(2 * n);
      for (int i = 0; i < 2 * n; ++i) cp[idx[i]] = (i < n ? 1.0 : -1.0) / n;
      null_vals[p] = cp.dot(gram * cp);
    }
    std::sort(null_vals.begin(), null_vals.end());
    const double q99 = null_vals[static_cast<std::size_t>(perms * 99 / 100)];
    if (observed < q99) ++inside;
  }
  INFO("inside=" << inside << "/" << trials);
  REQUIRE(inside >= 95);
}

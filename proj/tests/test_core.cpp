#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "distdyn/core/json_io.hpp"
#include "distdyn/core/rng.hpp"
#include "distdyn/core/types.hpp"
#include "support/fixtures.hpp"

using namespace distdyn;
using Catch::Approx;

namespace {

SimplexVector uniform_weights(int k) {
  return SimplexVector::from(Vector::Constant(k, 1.0 / k));
}

FittedModel wrap_model(GaussianDictionary dict) {
  FittedModel model;
  const int k = static_cast<int>(dict.size());
  model.dictionary = std::move(dict);
  model.weightTable.grid.points = {0.0, 1.0};
  model.weightTable.grid.horizon = 1.0;
  model.weightTable.rows = {uniform_weights(k), uniform_weights(k)};
  model.kernelBandwidths = {1.0, 1.0};
  model.ridge = Vector::Constant(k, 1e-2);
  return model;
}

}  // namespace

TEST_CASE("mixture_density: single standard normal at the mode", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({0.0}, {1.0}));
  const double f =
      mixture_density(dict, uniform_weights(1), Vector::Zero(1));
  REQUIRE(f == Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-9));
  REQUIRE(f == Approx(0.398942).margin(1e-6));
}

TEST_CASE("mixture_density: degenerate weight selects one component", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({1.5}, {2.0}));
  dict.components.push_back(testsupport::make_component({-7.0}, {0.5}));
  const SimplexVector alpha = SimplexVector::from((Vector(2) << 1.0, 0.0).finished());
  for (double x : {-2.0, 0.0, 1.5, 4.0}) {
    Vector xv = Vector::Constant(1, x);
    REQUIRE(mixture_density(dict, alpha, xv) ==
            gaussian_pdf(xv, dict.components[0]));
  }
}

TEST_CASE("mixture_density: three-component value vs direct scalar sum", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({-2.0}, {1.0}));
  dict.components.push_back(testsupport::make_component({0.0}, {1.0}));
  dict.components.push_back(testsupport::make_component({5.0}, {1.0}));
  const double f = mixture_density(dict, uniform_weights(3), Vector::Zero(1));
  auto scalar_normal = [](double x, double m) {
    return std::exp(-0.5 * (x - m) * (x - m)) / std::sqrt(2.0 * M_PI);
  };
  const double expected =
      (scalar_normal(0, -2) + scalar_normal(0, 0) + scalar_normal(0, 5)) / 3.0;
  REQUIRE(f == Approx(expected).epsilon(1e-12));
}

TEST_CASE("mixture_density: dimension mismatch rejected", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({0.0}, {1.0}));
  REQUIRE_THROWS_AS(mixture_density(dict, uniform_weights(1), Vector::Zero(2)),
                    InputError);
}

TEST_CASE("mixture_density integrates to one (Monte Carlo)", "[core]") {
  Rng rng(101);
  for (int d : {1, 2, 3}) {
    GaussianDictionary dict =
        testsupport::random_dictionary(rng, 3, d, 2.0, 0.3, 2.0);
    SimplexVector alpha = testsupport::random_simplex(rng, 3);
    // uniform box covering all means +- 8 sd
    Vector lo = Vector::Constant(d, 1e30), hi = Vector::Constant(d, -1e30);
    for (const auto& c : dict.components) {
      const Matrix cov = c.covariance();
      for (int q = 0; q < d; ++q) {
        const double sd = std::sqrt(cov(q, q));
        lo[q] = std::min(lo[q], c.mean[q] - 8.0 * sd);
        hi[q] = std::max(hi[q], c.mean[q] + 8.0 * sd);
      }
    }
    double volume = 1.0;
    for (int q = 0; q < d; ++q) volume *= hi[q] - lo[q];
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      Vector x(d);
      for (int q = 0; q < d; ++q) x[q] = rng.uniform(lo[q], hi[q]);
      const double f = mixture_density(dict, alpha, x);
      sum += f;
      sum_sq += f * f;
    }
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    const double estimate = volume * mean;
    const double se = volume * std::sqrt(var / n);
    INFO("d=" << d << " estimate=" << estimate << " se=" << se);
    REQUIRE(std::abs(estimate - 1.0) <= 3.0 * se + 1e-4);
  }
}

TEST_CASE("mixture_cdf_component: symmetry and limits in one dimension", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({0.0}, {1.0}));
  auto cdf = [&](double x) {
    return mixture_cdf_component(dict, uniform_weights(1),
                                 Vector::Constant(1, x))
        .first;
  };
  REQUIRE(cdf(0.0) == Approx(0.5).epsilon(1e-12));
  REQUIRE(cdf(1e6) == Approx(1.0).epsilon(1e-12));
  REQUIRE(cdf(-1e6) == Approx(0.0).margin(1e-12));

  // monotone non-decreasing
  double prev = 0.0;
  for (double x = -4.0; x <= 4.0; x += 0.25) {
    const double v = cdf(x);
    REQUIRE(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("mixture_cdf_component: symmetric two-component mixture", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({-1.0}, {1.0}));
  dict.components.push_back(testsupport::make_component({1.0}, {1.0}));
  const SimplexVector alpha = uniform_weights(2);
  const double p =
      mixture_cdf_component(dict, alpha, Vector::Zero(1)).first;
  REQUIRE(p == Approx(0.5).epsilon(1e-12));

  // cross-check by numeric integration of the density up to 0
  double integral = 0.0;
  const double a = -40.0, b = 0.0;
  const int steps = 40000;
  const double h = (b - a) / steps;
  for (int i = 0; i <= steps; ++i) {
    const double x = a + i * h;
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    integral += w * mixture_density(dict, alpha, Vector::Constant(1, x));
  }
  integral *= h;
  REQUIRE(p == Approx(integral).margin(1e-6));
}

TEST_CASE("serialize round-trip of the calibrated bivariate dictionary", "[core]") {
  FittedModel model = wrap_model(testsupport::bivariate_reference_dictionary());
  const std::string text = serialize_model(model);
  const FittedModel back = deserialize_model(text);

  REQUIRE(back.dictionary.size() == 5);
  for (std::size_t s = 0; s < 5; ++s) {
    REQUIRE(back.dictionary.components[s].mean ==
            model.dictionary.components[s].mean);
    REQUIRE(back.dictionary.components[s].cholesky ==
            model.dictionary.components[s].cholesky);
  }
  REQUIRE(back.weightTable.grid.points == model.weightTable.grid.points);
  REQUIRE(back.kernelBandwidths == model.kernelBandwidths);
  REQUIRE(back.ridge == model.ridge);
  REQUIRE(back.timeUnit == model.timeUnit);

  // covariances reconstructed from the round-tripped factors match the table
  const Matrix cov0 = back.dictionary.components[0].covariance();
  REQUIRE(cov0(0, 0) == Approx(194.95).epsilon(1e-12));
  REQUIRE(cov0(0, 1) == Approx(-0.1161).epsilon(1e-9));
}

TEST_CASE("serialize rejects an empty weight table", "[core]") {
  FittedModel model = wrap_model(testsupport::univariate_reference_dictionary());
  model.weightTable.rows.clear();
  REQUIRE_THROWS(serialize_model(model));
}

TEST_CASE("serialize/deserialize round-trip is exact on random models", "[core]") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const int k = 1 + static_cast<int>(rng.uniform_int(5));
    FittedModel model;
    model.dictionary = testsupport::random_dictionary(rng, k, d);
    const int m = 2 + static_cast<int>(rng.uniform_int(4));
    model.weightTable.grid.horizon = 1.0;
    for (int i = 0; i < m; ++i) {
      model.weightTable.grid.points.push_back(static_cast<double>(i) / (m - 1));
      model.weightTable.rows.push_back(testsupport::random_simplex(rng, k));
      model.kernelBandwidths.push_back(0.5 + rng.uniform());
    }
    model.ridge = Vector::Constant(k, 1e-2);

    const FittedModel back = deserialize_model(serialize_model(model));
    for (int s = 0; s < k; ++s) {
      REQUIRE(back.dictionary.components[s].mean ==
              model.dictionary.components[s].mean);
      REQUIRE(back.dictionary.components[s].cholesky ==
              model.dictionary.components[s].cholesky);
    }
    for (int i = 0; i < m; ++i)
      REQUIRE(back.weightTable.rows[i].weights ==
              model.weightTable.rows[i].weights);
    REQUIRE(back.weightTable.grid.points == model.weightTable.grid.points);
    REQUIRE(back.kernelBandwidths == model.kernelBandwidths);
    REQUIRE(back.ridge == model.ridge);
  }
}

TEST_CASE("deserialize reports missing fields", "[core]") {
  FittedModel model = wrap_model(testsupport::univariate_reference_dictionary());
  json j = model_to_json(model);
  j.erase("components");
  REQUIRE_THROWS_AS(model_from_json(j), ParseError);
  REQUIRE_THROWS_AS(deserialize_model("{not json"), ParseError);
}

TEST_CASE("SimplexVector construction rules", "[core]") {
  // tiny negatives from a solver are clamped to zero, then renormalized
  SimplexVector v =
      SimplexVector::from((Vector(3) << 0.6, 0.4, -1e-10).finished());
  REQUIRE(v.weights[2] == 0.0);
  REQUIRE(v.weights.sum() == Approx(1.0).epsilon(1e-12));
  REQUIRE(v.valid());

  // entries below -1e-9 are rejected outright
  REQUIRE_THROWS_AS(
      SimplexVector::from((Vector(2) << 1.0, -1e-6).finished()), InputError);
  // sums far from one are rejected
  REQUIRE_THROWS_AS(
      SimplexVector::from((Vector(2) << 0.5, 0.4).finished()), InputError);
  // sub-1e-12 dust is cleared
  SimplexVector w =
      SimplexVector::from((Vector(2) << 1.0 - 1e-13, 1e-13).finished());
  REQUIRE(w.weights[1] == 0.0);
}

TEST_CASE("covariance factors reconstruct symmetric PD matrices", "[core]") {
  Rng rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const Matrix cov = testsupport::random_covariance(rng, d);
    const GaussianComponent c =
        GaussianComponent::from_covariance(Vector::Zero(d), cov);
    const Matrix back = c.covariance();
    REQUIRE((back - back.transpose()).norm() <= 1e-12 * back.norm());
    REQUIRE((back - cov).norm() <= 1e-10 * cov.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> es(back);
    REQUIRE(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("TimeGrid validation", "[core]") {
  TimeGrid g;
  g.points = {0.0};
  REQUIRE_THROWS_AS(g.validate(), InputError);
  g.points = {0.0, 0.5, 0.5};
  REQUIRE_THROWS_AS(g.validate(), InputError);
  g.points = {0.0, 0.5, 1.0};
  REQUIRE_NOTHROW(g.validate());
  g.points = {0.0, 1.5};
  REQUIRE_THROWS_AS(g.validate(), InputError);  // exceeds horizon
  g.horizon = -1.0;
  REQUIRE_THROWS_AS(g.validate(), InputError);
}

TEST_CASE("SnapshotDataset validation", "[core]") {
  SnapshotDataset data;
  data.grid.points = {0.0, 1.0};
  data.snapshots = {Matrix::Zero(3, 2), Matrix::Zero(4, 2)};
  REQUIRE_NOTHROW(data.validate());
  REQUIRE(data.dimension() == 2);

  data.snapshots[1] = Matrix::Zero(4, 3);  // inconsistent dimension
  REQUIRE_THROWS_AS(data.validate(), InputError);

  data.snapshots = {Matrix::Zero(3, 2)};  // block count != grid size
  REQUIRE_THROWS_AS(data.validate(), InputError);

  data.snapshots = {Matrix::Zero(3, 2), Matrix::Zero(4, 2)};
  data.snapshots[0](1, 1) = std::nan("");
  REQUIRE_THROWS_AS(data.validate(), InputError);
}

TEST_CASE("Rng is deterministic and the counter hash separates streams", "[core]") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    REQUIRE(va == b.uniform());
    REQUIRE(va >= 0.0);
    REQUIRE(va < 1.0);
  }
  bool any_diff = false;
  for (int i = 0; i < 10; ++i) any_diff |= (a.uniform() != c.uniform());
  REQUIRE(any_diff);

  REQUIRE(counter_hash(1, 2, 3, 4) == counter_hash(1, 2, 3, 4));
  REQUIRE(counter_hash(1, 2, 3, 4) != counter_hash(1, 2, 3, 5));
  REQUIRE(counter_hash(1, 2, 3, 4) != counter_hash(1, 2, 4, 3));
}

TEST_CASE("mixture_sample reproduces mixture moments", "[core]") {
  GaussianDictionary dict;
  dict.components.push_back(testsupport::make_component({-2.0}, {1.0}));
  dict.components.push_back(testsupport::make_component({4.0}, {1.0}));
  const SimplexVector alpha =
      SimplexVector::from((Vector(2) << 0.25, 0.75).finished());
  Rng rng(5);
  const int n = 200000;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += mixture_sample(dict, alpha, rng)[0];
  mean /= n;
  // E X = 0.25 * (-2) + 0.75 * 4 = 2.5; sd of the mean ~ sqrt(7.75/n)
  REQUIRE(mean == Approx(2.5).margin(0.03));
}

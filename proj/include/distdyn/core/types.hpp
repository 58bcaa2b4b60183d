#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "distdyn/core/rng.hpp"

namespace distdyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered observation times, normalized into [0, T].
struct TimeGrid {
  std::vector<double> points;
  double horizon = 1.0;

  void validate() const {
    if (points.size() < 2) throw InputError("TimeGrid: need at least 2 points");
    if (!(horizon > 0.0)) throw InputError("TimeGrid: horizon must be > 0");
    if (points.front() < 0.0) throw InputError("TimeGrid: first point < 0");
    if (points.back() > horizon + 1e-12)
      throw InputError("TimeGrid: last point exceeds horizon");
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i] > points[i - 1]))
        throw InputError("TimeGrid: points must be strictly increasing");
  }
  std::size_t size() const { return points.size(); }
};

// One sample block (rows = observations) per grid point.
struct SnapshotDataset {
  TimeGrid grid;
  std::vector<Matrix> snapshots;

  void validate() const {
    grid.validate();
    if (snapshots.size() != grid.size())
      throw InputError("SnapshotDataset: one snapshot block per grid point");
    if (snapshots.empty()) throw InputError("SnapshotDataset: empty");
    const Eigen::Index d = snapshots.front().cols();
    if (d < 1) throw InputError("SnapshotDataset: dimension must be >= 1");
    for (const Matrix& block : snapshots) {
      if (block.rows() < 1)
        throw InputError("SnapshotDataset: every block needs N_i >= 1");
      if (block.cols() != d)
        throw InputError("SnapshotDataset: inconsistent dimension");
      if (!block.allFinite())
        throw InputError("SnapshotDataset: non-finite entries");
    }
  }
  Eigen::Index dimension() const { return snapshots.front().cols(); }
};

// A Gaussian component stored via the lower Cholesky factor of its
// covariance, so positive-definiteness is structural.
struct GaussianComponent {
  Vector mean;
  Matrix cholesky;  // lower triangular, positive diagonal

  Matrix covariance() const { return cholesky * cholesky.transpose(); }

  static GaussianComponent from_covariance(const Vector& mean,
                                           const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("GaussianComponent: covariance not PD");
    GaussianComponent c;
    c.mean = mean;
    c.cholesky = llt.matrixL();
    return c;
  }

  void validate() const {
    const Eigen::Index d = mean.size();
    if (cholesky.rows() != d || cholesky.cols() != d)
      throw InputError("GaussianComponent: shape mismatch");
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(cholesky(i, i) > 0.0))
        throw InputError("GaussianComponent: Cholesky diagonal must be > 0");
      for (Eigen::Index j = i + 1; j < d; ++j)
        if (cholesky(i, j) != 0.0)
          throw InputError("GaussianComponent: factor must be lower triangular");
    }
    if (!mean.allFinite() || !cholesky.allFinite())
      throw InputError("GaussianComponent: non-finite entries");
  }
};

// Shared dictionary: K components reused at every time; labels positional.
struct GaussianDictionary {
  std::vector<GaussianComponent> components;

  std::size_t size() const { return components.size(); }
  Eigen::Index dimension() const { return components.front().mean.size(); }

  void validate() const {
    if (components.empty()) throw InputError("GaussianDictionary: K >= 1");
    const Eigen::Index d = components.front().mean.size();
    for (const auto& c : components) {
      c.validate();
      if (c.mean.size() != d)
        throw InputError("GaussianDictionary: inconsistent dimension");
    }
  }
};

// Weight vector on the simplex. Construction clamps tiny negatives from QP
// round-off to 0 and renormalizes; anything worse is rejected.
struct SimplexVector {
  Vector weights;

  static SimplexVector from(Vector w) {
    if (w.size() < 1) throw InputError("SimplexVector: empty");
    for (Eigen::Index s = 0; s < w.size(); ++s) {
      if (!std::isfinite(w[s])) throw InputError("SimplexVector: non-finite");
      if (w[s] < -1e-9) throw InputError("SimplexVector: negative entry");
      if (w[s] < 1e-12) w[s] = 0.0;
    }
    const double sum = w.sum();
    if (std::abs(sum - 1.0) > 1e-6)
      throw InputError("SimplexVector: entries must sum to 1");
    w /= sum;
    SimplexVector v;
    v.weights = std::move(w);
    return v;
  }

  bool valid() const {
    if (weights.size() < 1) return false;
    double sum = 0.0;
    for (Eigen::Index s = 0; s < weights.size(); ++s) {
      if (!(weights[s] >= 0.0)) return false;
      sum += weights[s];
    }
    return std::abs(sum - 1.0) <= 1e-9;
  }
};

// One simplex row per grid point.
struct WeightTable {
  TimeGrid grid;
  std::vector<SimplexVector> rows;

  void validate() const {
    grid.validate();
    if (rows.size() != grid.size())
      throw InputError("WeightTable: one row per grid point");
    const Eigen::Index K = rows.front().weights.size();
    for (const auto& r : rows) {
      if (r.weights.size() != K) throw InputError("WeightTable: ragged rows");
      if (!r.valid()) throw InputError("WeightTable: invalid simplex row");
    }
  }
};

// Result of the discrete-time fit: dictionary + per-time weights +
// the frozen kernel bandwidths and the QP ridge that produced them.
struct FittedModel {
  GaussianDictionary dictionary;
  WeightTable weightTable;
  std::vector<double> kernelBandwidths;  // one sigma_i per grid point
  Vector ridge;                          // lambda vector, length K
  std::string timeUnit = "normalized";

  void validate() const {
    dictionary.validate();
    weightTable.validate();
    if (kernelBandwidths.size() != weightTable.grid.size())
      throw InputError("FittedModel: bandwidth count must equal grid size");
    for (double s : kernelBandwidths)
      if (!(s > 0.0)) throw InputError("FittedModel: bandwidths must be > 0");
    if (static_cast<std::size_t>(ridge.size()) != dictionary.size())
      throw InputError("FittedModel: ridge length must equal K");
    for (Eigen::Index s = 0; s < ridge.size(); ++s)
      if (ridge[s] < 0.0) throw InputError("FittedModel: ridge entries >= 0");
  }
};

// Multivariate normal density N(x | mean, L L^T) evaluated via the factor.
inline double gaussian_pdf(const Vector& x, const GaussianComponent& c) {
  const Eigen::Index d = x.size();
  // Solve L u = (x - mean); the quadratic form is |u|^2.
  Vector u = c.cholesky.triangularView<Eigen::Lower>().solve(x - c.mean);
  double log_det_l = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_det_l += std::log(c.cholesky(i, i));
  const double log_pdf =
      -0.5 * u.squaredNorm() - log_det_l - 0.5 * d * std::log(2.0 * M_PI);
  return std::exp(log_pdf);
}

// Mixture density sum_s alpha_s N(x | m_s, Sigma_s).
inline double mixture_density(const GaussianDictionary& dict,
                              const SimplexVector& alpha, const Vector& x) {
  if (x.size() != dict.dimension())
    throw InputError("mixture_density: dimension mismatch");
  if (static_cast<std::size_t>(alpha.weights.size()) != dict.size())
    throw InputError("mixture_density: weight length mismatch");
  double f = 0.0;
  for (std::size_t s = 0; s < dict.size(); ++s)
    f += alpha.weights[s] * gaussian_pdf(x, dict.components[s]);
  return f;
}

// Draw one point from the mixture (used by the d>1 CDF estimate and tests).
inline Vector mixture_sample(const GaussianDictionary& dict,
                             const SimplexVector& alpha, Rng& rng) {
  double u = rng.uniform();
  std::size_t s = 0;
  double acc = 0.0;
  for (; s + 1 < dict.size(); ++s) {
    acc += alpha.weights[s];
    if (u < acc) break;
  }
  const GaussianComponent& c = dict.components[s];
  Vector z(c.mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return c.mean + c.cholesky * z;
}

// Component-wise mixture CDF P(X <= x). Exact in d=1 via erf; for d>1 a
// Monte-Carlo estimate over the mixture, returned with its standard error.
inline std::pair<double, double> mixture_cdf_component(
    const GaussianDictionary& dict, const SimplexVector& alpha, const Vector& x,
    int mc_points = 100000, std::uint64_t seed = 0) {
  if (x.size() != dict.dimension())
    throw InputError("mixture_cdf_component: dimension mismatch");
  if (dict.dimension() == 1) {
    double f = 0.0;
    for (std::size_t s = 0; s < dict.size(); ++s) {
      const auto& c = dict.components[s];
      const double z = (x[0] - c.mean[0]) / (c.cholesky(0, 0) * std::sqrt(2.0));
      f += alpha.weights[s] * 0.5 * (1.0 + std::erf(z));
    }
    return {f, 0.0};
  }
  Rng rng(seed);
  double hits = 0.0;
  for (int i = 0; i < mc_points; ++i) {
    Vector y = mixture_sample(dict, alpha, rng);
    bool below = true;
    for (Eigen::Index j = 0; j < y.size(); ++j)
      if (y[j] > x[j]) {
        below = false;
        break;
      }
    if (below) hits += 1.0;
  }
  const double p = hits / mc_points;
  const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / mc_points);
  return {p, se};
}

}  // namespace distdyn

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "distdyn/core/types.hpp"

namespace distdyn {

struct KmeansInit {
  GaussianDictionary dictionary;
  WeightTable weights;
  double sse = 0.0;
};

namespace detail {

inline Eigen::Index sample_categorical(const Vector& weights, Rng& rng) {
  const double total = weights.sum();
  double u = rng.uniform() * total;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return weights.size() - 1;
}

struct LloydRun {
  Matrix centers;                    // K x d
  std::vector<int> assignment;       // per pooled row
  double sse = 0.0;
};

inline LloydRun lloyd_once(const Matrix& pooled, int k, Rng& rng,
                           int max_iter = 100) {
  const Eigen::Index n = pooled.rows();
  const Eigen::Index d = pooled.cols();

  // k-means++ seeding.
  Matrix centers(k, d);
  centers.row(0) = pooled.row(static_cast<Eigen::Index>(rng.uniform_int(
      static_cast<std::uint64_t>(n))));
  Vector d2 = (pooled.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    if (d2.maxCoeff() <= 0.0) {
      // All remaining points coincide with a center; pick uniformly.
      centers.row(c) = pooled.row(static_cast<Eigen::Index>(rng.uniform_int(
          static_cast<std::uint64_t>(n))));
    } else {
      centers.row(c) = pooled.row(sample_categorical(d2, rng));
    }
    d2 = d2.cwiseMin(
        (pooled.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dist = (pooled.row(i) - centers.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, d);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += pooled.row(i);
      ++counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        // Re-seed an empty cluster at the point farthest from its center.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double dist =
              (pooled.row(i) -
               centers.row(assignment[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        centers.row(c) = pooled.row(far);
        changed = true;
      } else {
        centers.row(c) =
            sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
    if (!changed && it > 0) break;
  }

  LloydRun run;
  run.centers = centers;
  run.assignment = std::move(assignment);
  run.sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    run.sse += (pooled.row(i) -
                centers.row(run.assignment[static_cast<std::size_t>(i)]))
                   .squaredNorm();
  return run;
}

}  // namespace detail

// Pool every snapshot, run Lloyd's algorithm with k-means++ seeding
// (best SSE over `restarts` runs), then read off the dictionary
// (centroid means, within-cluster covariances) and per-time cluster
// proportions as initial weights.
inline KmeansInit kmeans_init(const SnapshotDataset& data, int k,
                              std::uint64_t seed, int restarts = 10) {
  data.validate();
  if (k < 1) throw InputError("kmeans_init: K must be >= 1");
  const Eigen::Index d = data.dimension();
  Eigen::Index total = 0;
  for (const Matrix& x : data.snapshots) total += x.rows();
  if (total < k) throw InputError("kmeans_init: fewer pooled points than K");

  Matrix pooled(total, d);
  std::vector<std::size_t> snapshot_of(static_cast<std::size_t>(total));
  {
    Eigen::Index row = 0;
    for (std::size_t t = 0; t < data.snapshots.size(); ++t)
      for (Eigen::Index i = 0; i < data.snapshots[t].rows(); ++i) {
        pooled.row(row) = data.snapshots[t].row(i);
        snapshot_of[static_cast<std::size_t>(row)] = t;
        ++row;
      }
  }

  Rng rng(seed);
  detail::LloydRun best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    detail::LloydRun run = detail::lloyd_once(pooled, k, rng);
    if (run.sse < best.sse) best = std::move(run);
  }

  // Pooled per-dimension variance scale for the degeneracy ridge.
  const Vector mean = pooled.colwise().mean();
  const double pooled_var =
      (pooled.rowwise() - mean.transpose()).rowwise().squaredNorm().sum() /
      (static_cast<double>(std::max<Eigen::Index>(total - 1, 1)) *
       static_cast<double>(d));

  KmeansInit out;
  out.sse = best.sse;
  out.dictionary.components.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < total; ++i)
      if (best.assignment[static_cast<std::size_t>(i)] == c) members.push_back(i);
    Vector mu = best.centers.row(c);
    Matrix cov = Matrix::Zero(d, d);
    if (members.size() > 1) {
      for (Eigen::Index i : members) {
        const Vector diff = pooled.row(i).transpose() - mu;
        cov += diff * diff.transpose();
      }
      cov /= static_cast<double>(members.size() - 1);
    }
    Eigen::LLT<Matrix> llt(cov);
    if (members.size() < 2 || llt.info() != Eigen::Success ||
        llt.matrixLLT().diagonal().minCoeff() <= 0.0) {
      cov += 1e-3 * pooled_var * Matrix::Identity(d, d);
    }
    out.dictionary.components[static_cast<std::size_t>(c)] =
        GaussianComponent::from_covariance(mu, cov);
  }
  out.dictionary.validate();

  // Per-time weights are cluster proportions within each snapshot.
  out.weights.grid = data.grid;
  std::vector<Vector> counts(data.snapshots.size(),
                             Vector::Zero(static_cast<Eigen::Index>(k)));
  for (Eigen::Index i = 0; i < total; ++i)
    counts[snapshot_of[static_cast<std::size_t>(i)]]
          [best.assignment[static_cast<std::size_t>(i)]] += 1.0;
  for (std::size_t t = 0; t < counts.size(); ++t)
    out.weights.rows.push_back(SimplexVector::from(counts[t] / counts[t].sum()));
  return out;
}

}  // namespace distdyn

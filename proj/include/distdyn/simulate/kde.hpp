#pragma once

#include <cmath>
#include <vector>

#include "distdyn/core/types.hpp"

namespace distdyn {

// Product-Gaussian kernel density estimate with per-dimension Scott
// bandwidth h_j = N^{-1/(d+4)} * sd_j; sd_j floored at 1e-6 * range_j
// (absolute floor 1e-6 if the sample is constant in dimension j).
struct ProductKde {
  Matrix data;       // N x d
  Vector bandwidth;  // per-dimension h_j

  static ProductKde fit(const Matrix& sample) {
    if (sample.rows() < 1) throw InputError("ProductKde: empty sample");
    const Eigen::Index n = sample.rows();
    const Eigen::Index d = sample.cols();
    ProductKde kde;
    kde.data = sample;
    kde.bandwidth = Vector(d);
    const double scott =
        std::pow(static_cast<double>(n),
                 -1.0 / (static_cast<double>(d) + 4.0));
    for (Eigen::Index j = 0; j < d; ++j) {
      const Vector col = sample.col(j);
      const double mean = col.mean();
      double sd = 0.0;
      if (n > 1)
        sd = std::sqrt((col.array() - mean).square().sum() /
                       static_cast<double>(n - 1));
      const double range = col.maxCoeff() - col.minCoeff();
      sd = std::max(sd, 1e-6 * range);
      if (sd <= 0.0) sd = 1e-6;
      kde.bandwidth[j] = scott * sd;
    }
    return kde;
  }

  double density(const Vector& x) const {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (x.size() != d) throw InputError("ProductKde: x has wrong dimension");
    double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI);
    for (Eigen::Index j = 0; j < d; ++j) log_norm -= std::log(bandwidth[j]);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double q = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double z = (x[j] - data(i, j)) / bandwidth[j];
        q += z * z;
      }
      acc += std::exp(log_norm - 0.5 * q);
    }
    return acc / static_cast<double>(n);
  }
};

// Time-conditional baseline: a per-grid-time KDE, linearly interpolated in
// density space between neighbouring grid times.
struct KdeBaseline {
  TimeGrid grid;
  std::vector<ProductKde> per_time;

  static KdeBaseline fit(const SnapshotDataset& data) {
    data.validate();
    KdeBaseline baseline;
    baseline.grid = data.grid;
    baseline.per_time.reserve(data.snapshots.size());
    for (std::size_t i = 0; i < data.snapshots.size(); ++i) {
      if (data.snapshots[i].rows() < 2)
        throw InputError("kde_baseline: need N >= 2 at every grid point");
      baseline.per_time.push_back(ProductKde::fit(data.snapshots[i]));
    }
    return baseline;
  }

  double density(double t, const Vector& x) const {
    const std::vector<double>& pts = grid.points;
    if (t < pts.front() - 1e-12 || t > pts.back() + 1e-12)
      throw InputError("kde_baseline: t outside the grid span");
    if (t <= pts.front()) return per_time.front().density(x);
    if (t >= pts.back()) return per_time.back().density(x);
    std::size_t hi = 1;
    while (pts[hi] < t) ++hi;
    const std::size_t lo = hi - 1;
    if (t == pts[lo]) return per_time[lo].density(x);
    const double lambda = (t - pts[lo]) / (pts[hi] - pts[lo]);
    return (1.0 - lambda) * per_time[lo].density(x) +
           lambda * per_time[hi].density(x);
  }
};

inline double kde_baseline_density(const SnapshotDataset& data, double t,
                                   const Vector& x) {
  return KdeBaseline::fit(data).density(t, x);
}

}  // namespace distdyn

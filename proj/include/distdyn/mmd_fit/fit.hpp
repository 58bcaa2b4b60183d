#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "distdyn/core/types.hpp"
#include "distdyn/kernel/kernel.hpp"
#include "distdyn/mmd_fit/kmeans.hpp"
#include "distdyn/mmd_fit/objective.hpp"
#include "distdyn/mmd_fit/qp.hpp"

namespace distdyn {

struct FitConfig {
  int k = 5;
  double ridge = 1e-2;       // QP ridge, applied to every component...
  Vector ridge_vector;       // ...unless a per-component vector is given
  int outer_iterations = 50;
  int inner_steps = 20;
  double learning_rate = 1e-3;
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;

  Vector ridge_for(int k_components) const {
    if (ridge_vector.size() > 0) {
      if (ridge_vector.size() != static_cast<Eigen::Index>(k_components))
        throw InputError("FitConfig: ridge vector length != K");
      return ridge_vector;
    }
    return Vector::Constant(k_components, ridge);
  }
};

struct FitResult {
  FittedModel model;
  // (outer_iter, total_objective) pairs, one row per outer round.
  std::vector<std::pair<int, double>> trace;
};

// Adam moments for the dictionary parameters; persists across outer rounds.
struct AdamState {
  std::vector<Vector> m_mean, v_mean;
  std::vector<Matrix> m_chol, v_chol;
  long step = 0;

  static AdamState zeros(int k, Eigen::Index d) {
    AdamState s;
    s.m_mean.assign(static_cast<std::size_t>(k), Vector::Zero(d));
    s.v_mean.assign(static_cast<std::size_t>(k), Vector::Zero(d));
    s.m_chol.assign(static_cast<std::size_t>(k), Matrix::Zero(d, d));
    s.v_chol.assign(static_cast<std::size_t>(k), Matrix::Zero(d, d));
    return s;
  }
};

namespace detail {

inline double total_objective(const GaussianDictionary& dict,
                              const SnapshotDataset& data,
                              const std::vector<double>& bandwidths,
                              const WeightTable& table,
                              const std::vector<double>& self_terms) {
  double total = 0.0;
  for (std::size_t t = 0; t < data.snapshots.size(); ++t) {
    const Matrix I = component_gram(dict, bandwidths[t]);
    const Vector J = data_cross_term(dict, bandwidths[t], data.snapshots[t]);
    const Vector& alpha = table.rows[t].weights;
    total += alpha.dot(I * alpha) - 2.0 * alpha.dot(J) + self_terms[t];
  }
  return total;
}

}  // namespace detail

// One block of Adam steps on the summed per-time objectives
// sum_i (alpha_i^T I_i alpha_i - 2 alpha_i^T J_i), weights held fixed.
// Cholesky diagonals are floored at 1e-6 to keep factors valid.
inline GaussianDictionary global_update(GaussianDictionary dict,
                                        const WeightTable& weights,
                                        const SnapshotDataset& data,
                                        const std::vector<double>& bandwidths,
                                        const FitConfig& config,
                                        AdamState& adam,
                                        double* objective_before = nullptr,
                                        double* objective_after = nullptr) {
  const std::size_t K = dict.size();
  const Eigen::Index d = dict.dimension();
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  std::vector<double> self_terms(data.snapshots.size(), 0.0);
  if (objective_before || objective_after)
    for (std::size_t t = 0; t < data.snapshots.size(); ++t)
      self_terms[t] = data_self_term(data.snapshots[t], bandwidths[t]);
  if (objective_before)
    *objective_before =
        detail::total_objective(dict, data, bandwidths, weights, self_terms);

  for (int step = 0; step < config.inner_steps; ++step) {
    std::vector<Vector> g_mean(K, Vector::Zero(d));
    std::vector<Matrix> g_chol(K, Matrix::Zero(d, d));
    for (std::size_t t = 0; t < data.snapshots.size(); ++t) {
      MmdGradients g = mmd_objective_gradients(
          dict, bandwidths[t], data.snapshots[t], weights.rows[t].weights);
      for (std::size_t s = 0; s < K; ++s) {
        g_mean[s] += g.d_mean[s];
        g_chol[s] += g.d_chol[s];
      }
    }
    for (std::size_t s = 0; s < K; ++s)
      if (!g_mean[s].allFinite() || !g_chol[s].allFinite())
        throw NumericalError("global_update: non-finite gradient for component " +
                             std::to_string(s));

    adam.step += 1;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
    for (std::size_t s = 0; s < K; ++s) {
      adam.m_mean[s] = b1 * adam.m_mean[s] + (1.0 - b1) * g_mean[s];
      adam.v_mean[s] =
          b2 * adam.v_mean[s] + (1.0 - b2) * g_mean[s].cwiseProduct(g_mean[s]);
      dict.components[s].mean -=
          config.learning_rate *
          ((adam.m_mean[s] / c1).array() /
           ((adam.v_mean[s] / c2).array().sqrt() + eps))
              .matrix();

      adam.m_chol[s] = b1 * adam.m_chol[s] + (1.0 - b1) * g_chol[s];
      adam.v_chol[s] =
          b2 * adam.v_chol[s] + (1.0 - b2) * g_chol[s].cwiseProduct(g_chol[s]);
      Matrix upd = ((adam.m_chol[s] / c1).array() /
                    ((adam.v_chol[s] / c2).array().sqrt() + eps))
                       .matrix();
      dict.components[s].cholesky -= config.learning_rate * upd;
      dict.components[s].cholesky =
          Matrix(dict.components[s].cholesky.triangularView<Eigen::Lower>());
      for (Eigen::Index j = 0; j < d; ++j)
        if (dict.components[s].cholesky(j, j) < 1e-6)
          dict.components[s].cholesky(j, j) = 1e-6;
    }
  }

  if (objective_after)
    *objective_after =
        detail::total_objective(dict, data, bandwidths, weights, self_terms);
  return dict;
}

// Alternating scheme: k-means initialization, then `outer_iterations`
// rounds of {per-time simplex QP, global Adam update}, then a final QP
// pass. Bandwidths come from the median heuristic on the raw snapshots
// and stay frozen. Component labels are positional and never permuted.
inline FitResult fit(const SnapshotDataset& data, const FitConfig& config) {
  data.validate();
  const std::size_t n_times = data.snapshots.size();
  const Vector lambda = config.ridge_for(config.k);

  std::vector<double> bandwidths(n_times);
  for (std::size_t t = 0; t < n_times; ++t)
    bandwidths[t] = median_heuristic(data.snapshots[t]);

  KmeansInit init =
      kmeans_init(data, config.k, config.seed, config.kmeans_restarts);
  GaussianDictionary dict = init.dictionary;
  WeightTable table = init.weights;

  FitResult result;
  if (config.outer_iterations == 0) {
    result.model.dictionary = dict;
    result.model.weightTable = table;
    result.model.kernelBandwidths = bandwidths;
    result.model.ridge = lambda;
    result.model.timeUnit = "normalized";
    result.model.validate();
    return result;
  }

  std::vector<double> self_terms(n_times);
  for (std::size_t t = 0; t < n_times; ++t)
    self_terms[t] = data_self_term(data.snapshots[t], bandwidths[t]);

  AdamState adam = AdamState::zeros(config.k, data.dimension());
  for (int outer = 1; outer <= config.outer_iterations; ++outer) {
    for (std::size_t t = 0; t < n_times; ++t) {
      const Matrix I = component_gram(dict, bandwidths[t]);
      const Vector J = data_cross_term(dict, bandwidths[t], data.snapshots[t]);
      table.rows[t] = SimplexVector::from(solve_simplex_qp(I, J, lambda).alpha);
    }
    dict = global_update(dict, table, data, bandwidths, config, adam);
    result.trace.emplace_back(
        outer,
        detail::total_objective(dict, data, bandwidths, table, self_terms));
  }
  for (std::size_t t = 0; t < n_times; ++t) {
    const Matrix I = component_gram(dict, bandwidths[t]);
    const Vector J = data_cross_term(dict, bandwidths[t], data.snapshots[t]);
    table.rows[t] = SimplexVector::from(solve_simplex_qp(I, J, lambda).alpha);
  }

  result.model.dictionary = dict;
  result.model.weightTable = table;
  result.model.kernelBandwidths = bandwidths;
  result.model.ridge = lambda;
  result.model.timeUnit = "normalized";
  result.model.validate();
  return result;
}

}  // namespace distdyn

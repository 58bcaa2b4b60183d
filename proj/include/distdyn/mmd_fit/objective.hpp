#pragma once

#include <cmath>
#include <vector>

#include "distdyn/core/types.hpp"
#include "distdyn/kernel/kernel.hpp"

namespace distdyn {

// Pieces of the per-time quadratic objective
//   MMD^2(empirical, mixture) = alpha^T I alpha - 2 alpha^T J + C.
struct ObjectivePieces {
  Matrix I;      // K x K component gram
  Vector J;      // length K data cross term
  double C = 0;  // data self term
  double sigma = 0;
};

namespace detail {

// Shared factor (sigma^2)^(d/2) / sqrt(det M) * exp(-q/2) with M PD.
// Returns the value and, when requested, M^{-1} via the cached solver.
struct GramKernel {
  Eigen::LLT<Matrix> llt;
  double log_norm;  // log[(sigma^2)^(d/2) / sqrt(det M)]

  GramKernel(const Matrix& m, double sigma) : llt(m) {
    if (llt.info() != Eigen::Success)
      throw NumericalError("component gram: covariance sum not PD");
    const Eigen::Index d = m.rows();
    double log_det = 0.0;
    const Matrix& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
    log_norm = 0.5 * d * std::log(sigma * sigma) - 0.5 * log_det;
  }

  double value(const Vector& delta) const {
    const double q = delta.dot(llt.solve(delta));
    return std::exp(log_norm - 0.5 * q);
  }
};

}  // namespace detail

// (I)_{s,r} = (sigma^2)^{d/2} / sqrt(det(S_s+S_r+sigma^2 Id))
//           * exp(-1/2 (m_s-m_r)^T (S_s+S_r+sigma^2 Id)^{-1} (m_s-m_r)).
inline Matrix component_gram(const GaussianDictionary& dict, double sigma) {
  if (!(sigma > 0.0)) throw InputError("component_gram: sigma must be > 0");
  const std::size_t K = dict.size();
  const Eigen::Index d = dict.dimension();
  std::vector<Matrix> covs(K);
  for (std::size_t s = 0; s < K; ++s) covs[s] = dict.components[s].covariance();
  const Matrix ridge = sigma * sigma * Matrix::Identity(d, d);
  Matrix I(K, K);
  for (std::size_t s = 0; s < K; ++s)
    for (std::size_t r = s; r < K; ++r) {
      detail::GramKernel gk(covs[s] + covs[r] + ridge, sigma);
      const double v = gk.value(dict.components[s].mean - dict.components[r].mean);
      I(s, r) = v;
      I(r, s) = v;
    }
  return I;
}

// (J)_s = (1/N) sum_j (sigma^2)^{d/2} / sqrt(det(S_s+sigma^2 Id))
//       * exp(-1/2 (X_j-m_s)^T (S_s+sigma^2 Id)^{-1} (X_j-m_s)).
inline Vector data_cross_term(const GaussianDictionary& dict, double sigma,
                              const Matrix& snapshot) {
  if (snapshot.rows() < 1) throw InputError("data_cross_term: N >= 1 required");
  const std::size_t K = dict.size();
  const Eigen::Index d = dict.dimension();
  const Eigen::Index n = snapshot.rows();
  const Matrix ridge = sigma * sigma * Matrix::Identity(d, d);
  Vector J(K);
  for (std::size_t s = 0; s < K; ++s) {
    detail::GramKernel gk(dict.components[s].covariance() + ridge, sigma);
    // U holds X_j - m_s as columns; quadratic forms come from one solve.
    Matrix u = snapshot.transpose().colwise() - dict.components[s].mean;
    Matrix solved = gk.llt.solve(u);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      acc += std::exp(gk.log_norm - 0.5 * u.col(j).dot(solved.col(j)));
    J[s] = acc / static_cast<double>(n);
  }
  return J;
}

// C = (1/N^2) sum_{j,l} k(X_j, X_l): mean of the full kernel matrix.
inline double data_self_term(const Matrix& snapshot, double sigma) {
  const Eigen::Index n = snapshot.rows();
  if (n < 1) throw InputError("data_self_term: N >= 1 required");
  const double inv = -1.0 / (2.0 * sigma * sigma);
  Vector sq = snapshot.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * snapshot * snapshot.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  return (d2 * inv).array().exp().mean();
}

inline ObjectivePieces assemble_objective(const GaussianDictionary& dict,
                                          double sigma, const Matrix& snapshot) {
  ObjectivePieces p;
  p.I = component_gram(dict, sigma);
  p.J = data_cross_term(dict, sigma, snapshot);
  p.C = data_self_term(snapshot, sigma);
  p.sigma = sigma;
  return p;
}

inline double objective_value(const ObjectivePieces& p, const Vector& alpha) {
  return alpha.dot(p.I * alpha) - 2.0 * alpha.dot(p.J) + p.C;
}

// Value and analytic gradients of F = alpha^T I alpha - 2 alpha^T J with
// respect to component means and Cholesky factors (alpha held fixed; the
// data self term C does not depend on the dictionary).
//
// Each gram entry E with metric M = covariance sum + sigma^2 Id and offset
// delta satisfies
//   dE/d(delta)  = -E * M^{-1} delta,
//   dE/d(Sigma)  =  E * (-1/2 M^{-1} + 1/2 M^{-1} delta delta^T M^{-1}),
// and the Cholesky chain rule is dF/dL = (G + G^T) L restricted to the
// lower triangle, where G accumulates dF/dSigma.
struct MmdGradients {
  double value = 0.0;
  std::vector<Vector> d_mean;
  std::vector<Matrix> d_chol;
};

inline MmdGradients mmd_objective_gradients(const GaussianDictionary& dict,
                                            double sigma, const Matrix& snapshot,
                                            const Vector& alpha) {
  const std::size_t K = dict.size();
  const Eigen::Index d = dict.dimension();
  const Eigen::Index n = snapshot.rows();
  const Matrix ridge = sigma * sigma * Matrix::Identity(d, d);

  std::vector<Matrix> covs(K);
  for (std::size_t s = 0; s < K; ++s) covs[s] = dict.components[s].covariance();

  std::vector<Vector> g_mean(K, Vector::Zero(d));
  std::vector<Matrix> g_sigma(K, Matrix::Zero(d, d));
  double value = 0.0;

  // Quadratic part alpha^T I alpha.
  for (std::size_t s = 0; s < K; ++s)
    for (std::size_t r = s; r < K; ++r) {
      detail::GramKernel gk(covs[s] + covs[r] + ridge, sigma);
      const Vector delta = dict.components[s].mean - dict.components[r].mean;
      const Vector minv_delta = gk.llt.solve(delta);
      const double e = std::exp(gk.log_norm - 0.5 * delta.dot(minv_delta));
      const double w = (s == r) ? alpha[s] * alpha[s] : 2.0 * alpha[s] * alpha[r];
      value += w * e;
      const Matrix minv = gk.llt.solve(Matrix::Identity(d, d));
      const Matrix dsig =
          e * (-0.5 * minv + 0.5 * (minv_delta * minv_delta.transpose()));
      if (s == r) {
        // Sigma_s enters the metric twice on the diagonal entries.
        g_sigma[s] += w * 2.0 * dsig;
      } else {
        g_sigma[s] += w * dsig;
        g_sigma[r] += w * dsig;
        g_mean[s] += w * (-e) * minv_delta;
        g_mean[r] += w * e * minv_delta;
      }
    }

  // Cross part -2 alpha^T J.
  for (std::size_t s = 0; s < K; ++s) {
    detail::GramKernel gk(covs[s] + ridge, sigma);
    Matrix u = snapshot.transpose().colwise() - dict.components[s].mean;
    Matrix solved = gk.llt.solve(u);
    const Matrix minv = gk.llt.solve(Matrix::Identity(d, d));
    double jsum = 0.0;
    Vector wsum_u = Vector::Zero(d);
    Matrix wsum_uu = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double e = std::exp(gk.log_norm - 0.5 * u.col(j).dot(solved.col(j)));
      jsum += e;
      wsum_u += e * solved.col(j);
      wsum_uu += e * (solved.col(j) * solved.col(j).transpose());
    }
    const double scale = -2.0 * alpha[s] / static_cast<double>(n);
    value += scale * jsum;
    // d/dm_s of exp(-q/2) is +e * M^{-1} u (u = X_j - m_s).
    g_mean[s] += scale * wsum_u;
    g_sigma[s] += scale * (-0.5 * jsum * minv + 0.5 * wsum_uu);
  }

  MmdGradients out;
  out.value = value;
  out.d_mean = std::move(g_mean);
  out.d_chol.resize(K);
  for (std::size_t s = 0; s < K; ++s) {
    const Matrix& l = dict.components[s].cholesky;
    Matrix g = (g_sigma[s] + g_sigma[s].transpose()) * l;
    out.d_chol[s] = g.triangularView<Eigen::Lower>();
  }
  return out;
}

}  // namespace distdyn

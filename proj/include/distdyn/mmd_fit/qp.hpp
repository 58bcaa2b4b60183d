#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "distdyn/core/types.hpp"

namespace distdyn {

// Euclidean projection onto the probability simplex (sort-based).
inline Vector project_simplex(const Vector& v) {
  const Eigen::Index K = v.size();
  std::vector<double> u(v.data(), v.data() + K);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (Eigen::Index i = 0; i < K; ++i) {
    css += u[i];
    const double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i) + 1;
      theta = t;
    }
  }
  (void)rho;
  return (v.array() - theta).max(0.0);
}

struct QpResult {
  Vector alpha;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool used_fallback = false;
};

namespace detail {

// Max KKT violation for min x^T A x - 2 x^T J over the simplex:
// stationarity of active/inactive coordinates plus primal feasibility.
inline double qp_kkt_residual(const Matrix& a, const Vector& j, const Vector& x) {
  const Vector g = 2.0 * (a * x) - 2.0 * j;
  // Multiplier for the equality constraint: average gradient over support.
  double mu = 0.0;
  int support = 0;
  for (Eigen::Index s = 0; s < x.size(); ++s)
    if (x[s] > 1e-12) {
      mu += g[s];
      ++support;
    }
  mu /= std::max(support, 1);
  double res = std::abs(x.sum() - 1.0);
  for (Eigen::Index s = 0; s < x.size(); ++s) {
    if (x[s] > 1e-12)
      res = std::max(res, std::abs(g[s] - mu));  // stationarity on support
    else
      res = std::max(res, std::max(0.0, mu - g[s]));  // dual feasibility
    res = std::max(res, std::max(0.0, -x[s]));
  }
  return res;
}

// Projected gradient fallback with fixed step 1/(2 lambda_max).
inline Vector qp_projected_gradient(const Matrix& a, const Vector& j,
                                    Vector x, int max_iter = 20000,
                                    double tol = 1e-11) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const double lmax = es.eigenvalues().maxCoeff();
  const double step = 1.0 / (2.0 * std::max(lmax, 1e-12));
  for (int it = 0; it < max_iter; ++it) {
    const Vector g = 2.0 * (a * x) - 2.0 * j;
    const Vector next = project_simplex(x - step * g);
    const double move = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    if (move < tol) break;
  }
  return x;
}

}  // namespace detail

// Minimize alpha^T I alpha - 2 alpha^T J + sum_s lambda_s alpha_s^2 over the
// probability simplex. Active-set on the nonnegativity constraints with the
// equality handled by a bordered KKT system; falls back to projected
// gradient if the active set cycles (> 2K changes).
inline QpResult solve_simplex_qp(const Matrix& I, const Vector& J,
                                 const Vector& lambda) {
  const Eigen::Index K = I.rows();
  if (I.cols() != K || J.size() != K || lambda.size() != K)
    throw InputError("solve_simplex_qp: dimension mismatch");
  for (Eigen::Index s = 0; s < K; ++s)
    if (lambda[s] < 0.0)
      throw InputError("solve_simplex_qp: ridge weights must be >= 0");
  {
    const Matrix sym = 0.5 * (I + I.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw NumericalError("solve_simplex_qp: quadratic term is not PSD");
  }
  Matrix a = I;
  a.diagonal() += lambda;
  a = 0.5 * (a + a.transpose());

  QpResult result;
  std::vector<bool> active(K, false);
  Vector x = Vector::Constant(K, 1.0 / static_cast<double>(K));
  const int max_changes = 2 * static_cast<int>(K);
  int changes = 0;
  bool fallback = false;

  while (true) {
    // Solve equality-constrained subproblem on the free set F:
    // [2 A_FF  1; 1^T  0] [x_F; mu] = [2 J_F; 1].
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index s = 0; s < K; ++s)
      if (!active[s]) free_idx.push_back(s);
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    if (nf == 0) {
      fallback = true;
      break;
    }
    Matrix kkt = Matrix::Zero(nf + 1, nf + 1);
    Vector rhs = Vector::Zero(nf + 1);
    for (Eigen::Index p = 0; p < nf; ++p) {
      for (Eigen::Index q = 0; q < nf; ++q)
        kkt(p, q) = 2.0 * a(free_idx[p], free_idx[q]);
      kkt(p, nf) = 1.0;
      kkt(nf, p) = 1.0;
      rhs[p] = 2.0 * J[free_idx[p]];
    }
    rhs[nf] = 1.0;
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) {
      fallback = true;
      break;
    }
    const Vector sol = lu.solve(rhs);
    const double mu = sol[nf];

    Vector cand = Vector::Zero(K);
    for (Eigen::Index p = 0; p < nf; ++p) cand[free_idx[p]] = sol[p];

    // Activate the most negative coordinate, if any.
    Eigen::Index worst = -1;
    double worst_val = -1e-12;
    for (Eigen::Index p = 0; p < nf; ++p)
      if (sol[p] < worst_val) {
        worst_val = sol[p];
        worst = free_idx[p];
      }
    if (worst >= 0) {
      active[worst] = true;
      ++changes;
      ++result.iterations;
      if (changes > max_changes) {
        fallback = true;
        break;
      }
      continue;
    }

    // Release an active constraint whose multiplier says it wants in:
    // gradient component below mu strictly.
    x = cand;
    const Vector g = 2.0 * (a * x) - 2.0 * J;
    Eigen::Index release = -1;
    double best_gap = -1e-10;
    for (Eigen::Index s = 0; s < K; ++s)
      if (active[s] && g[s] - mu < best_gap) {
        best_gap = g[s] - mu;
        release = s;
      }
    if (release >= 0) {
      active[release] = false;
      ++changes;
      ++result.iterations;
      if (changes > max_changes) {
        fallback = true;
        break;
      }
      continue;
    }
    break;  // KKT satisfied
  }

  if (fallback) {
    x = detail::qp_projected_gradient(a, J, project_simplex(x));
    result.used_fallback = true;
  }
  // Clean tiny negatives from the linear solve and renormalize.
  x = x.array().max(0.0);
  const double total = x.sum();
  if (!(total > 0.0)) throw NumericalError("solve_simplex_qp: zero mass solution");
  x /= total;
  result.alpha = x;
  result.kkt_residual = detail::qp_kkt_residual(a, J, x);
  return result;
}

inline QpResult solve_simplex_qp(const Matrix& I, const Vector& J, double lambda) {
  return solve_simplex_qp(I, J, Vector::Constant(I.rows(), lambda));
}

}  // namespace distdyn

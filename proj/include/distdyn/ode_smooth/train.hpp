#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "distdyn/core/types.hpp"
#include "distdyn/ode_smooth/mlp.hpp"
#include "distdyn/ode_smooth/model.hpp"

namespace distdyn {

struct OdeTrainConfig {
  SimplexMode mode = SimplexMode::PositivePart;
  int width = 64;
  double horizon = 1.0;
  double step = 0.01;
  double nu = 1e-10;
  double learning_rate = 1e-3;
  int epochs = 2000;
  std::uint64_t seed = 0;
};

struct OdeTrainResult {
  OdeWeightModel model;
  std::vector<std::pair<int, double>> loss_trace;  // (epoch, loss)
  double best_loss = 0.0;
};

namespace detail {

// Forward integration along the grid with tapes, then reverse accumulation:
// L(phi) = sum_i ||alpha(t_i; phi) - alpha_i||^2 + nu ||phi||^2.
// The initial state z0 is fixed (not a trainable parameter).
inline double ode_loss_and_grad(const VectorFieldMlp& field, const Vector& z0,
                                const std::vector<double>& grid,
                                const std::vector<Vector>& targets,
                                double h, double nu, SimplexMode mode,
                                MlpTensors& grad) {
  const std::size_t n = grid.size();
  std::vector<std::vector<Rk4Tape>> segments(n > 0 ? n - 1 : 0);
  std::vector<Vector> z_at_grid(n);
  Vector z = z0;
  z_at_grid[0] = z;
  double t = grid[0];
  for (std::size_t i = 1; i < n; ++i) {
    while (t < grid[i] - 1e-12) {
      const double hh = std::min(h, grid[i] - t);
      Rk4Tape tape;
      z = rk4_step(field, z, t, hh, &tape);
      segments[i - 1].push_back(std::move(tape));
      t += hh;
    }
    t = grid[i];
    z_at_grid[i] = z;
  }

  double loss = nu * field.p.squared_norm();
  std::vector<Vector> g_alpha(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector a = to_simplex(z_at_grid[i], mode);
    const Vector r = a - targets[i];
    loss += r.squaredNorm();
    g_alpha[i] = 2.0 * r;
  }

  grad = MlpTensors::zeros(field.k, field.width);
  grad.w1 = 2.0 * nu * field.p.w1;
  grad.b1 = 2.0 * nu * field.p.b1;
  grad.w2 = 2.0 * nu * field.p.w2;
  grad.b2 = 2.0 * nu * field.p.b2;
  grad.w3 = 2.0 * nu * field.p.w3;
  grad.b3 = 2.0 * nu * field.p.b3;

  Vector gz = simplex_vjp(z_at_grid[n - 1], g_alpha[n - 1], mode);
  for (std::size_t i = n - 1; i-- > 0;) {
    for (auto it = segments[i].rbegin(); it != segments[i].rend(); ++it)
      gz = rk4_step_vjp(field, *it, gz, grad);
    gz += simplex_vjp(z_at_grid[i], g_alpha[i], mode);
  }
  return loss;
}

inline void adam_update(MlpTensors& p, const MlpTensors& g, MlpTensors& m,
                        MlpTensors& v, long step, double lr) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  auto upd_m = [&](Matrix& pp, const Matrix& gg, Matrix& mm, Matrix& vv) {
    mm = b1 * mm + (1.0 - b1) * gg;
    vv = b2 * vv + (1.0 - b2) * gg.cwiseProduct(gg);
    pp -= lr * ((mm / c1).array() / ((vv / c2).array().sqrt() + eps)).matrix();
  };
  auto upd_v = [&](Vector& pp, const Vector& gg, Vector& mm, Vector& vv) {
    mm = b1 * mm + (1.0 - b1) * gg;
    vv = b2 * vv + (1.0 - b2) * gg.cwiseProduct(gg);
    pp -= lr * ((mm / c1).array() / ((vv / c2).array().sqrt() + eps)).matrix();
  };
  upd_m(p.w1, g.w1, m.w1, v.w1);
  upd_v(p.b1, g.b1, m.b1, v.b1);
  upd_m(p.w2, g.w2, m.w2, v.w2);
  upd_v(p.b2, g.b2, m.b2, v.b2);
  upd_m(p.w3, g.w3, m.w3, v.w3);
  upd_v(p.b3, g.b3, m.b3, v.b3);
}

}  // namespace detail

// Fit the vector field to a weight table by full-batch Adam on the unrolled
// RK4 loss; keeps the parameter state with the best recorded loss.
inline OdeTrainResult train_ode(const WeightTable& table,
                                const OdeTrainConfig& config) {
  table.validate();
  const std::size_t n = table.rows.size();
  if (n < 2) throw InputError("train_ode: need at least two grid points");
  const int k = static_cast<int>(table.rows[0].weights.size());
  std::vector<double> grid = table.grid.points;
  for (double t : grid)
    if (t < -1e-12 || t > config.horizon + 1e-12)
      throw InputError("train_ode: grid point outside [0, T]");

  std::vector<Vector> targets;
  targets.reserve(n);
  for (const SimplexVector& row : table.rows) targets.push_back(row.weights);
  Rng rng(config.seed);
  VectorFieldMlp field = VectorFieldMlp::init(k, config.width, rng);
  const Vector z0 = init_from_weights(targets[0], config.mode);

  MlpTensors m = MlpTensors::zeros(k, config.width);
  MlpTensors v = MlpTensors::zeros(k, config.width);
  MlpTensors best_params = field.p;
  double best_loss = std::numeric_limits<double>::infinity();

  OdeTrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    MlpTensors grad;
    const double loss = detail::ode_loss_and_grad(
        field, z0, grid, targets, config.step, config.nu, config.mode, grad);
    if (!std::isfinite(loss))
      throw NumericalError("train_ode: non-finite loss at epoch " +
                           std::to_string(epoch));
    result.loss_trace.emplace_back(epoch, loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_params = field.p;
    }
    detail::adam_update(field.p, grad, m, v, epoch, config.learning_rate);
  }

  field.p = best_params;
  result.best_loss = best_loss;
  result.model.field = std::move(field);
  result.model.z0 = z0;
  result.model.horizon = config.horizon;
  result.model.step = config.step;
  result.model.mode = config.mode;
  result.model.nu = config.nu;
  result.model.validate();
  return result;
}

}  // namespace distdyn

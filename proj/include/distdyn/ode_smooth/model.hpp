#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "distdyn/core/json_io.hpp"
#include "distdyn/core/types.hpp"
#include "distdyn/ode_smooth/mlp.hpp"

namespace distdyn {

enum class SimplexMode { PositivePart, Softmax };

inline std::string simplex_mode_name(SimplexMode mode) {
  return mode == SimplexMode::PositivePart ? "positive-part" : "softmax";
}

inline SimplexMode simplex_mode_from_name(const std::string& name) {
  if (name == "positive-part") return SimplexMode::PositivePart;
  if (name == "softmax") return SimplexMode::Softmax;
  throw ParseError("unknown simplex mode: " + name);
}

// Map latent state to the simplex. Positive-part: alpha = z_+ / <1, z_+>,
// with the epsilon convention z_+ -> z_+ + eps*1 only when every entry is
// <= 0. Softmax: shift-invariant exp / sum-exp.
inline Vector to_simplex(const Vector& z, SimplexMode mode) {
  const Eigen::Index K = z.size();
  if (mode == SimplexMode::Softmax) {
    Vector e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
  }
  const double eps = 1e-8;
  Vector zp = z.array().max(0.0);
  double total = zp.sum();
  if (total < eps) {
    zp = zp.array() + eps;
    total = zp.sum();
  }
  return zp / total;
}

// Reverse-mode of to_simplex: upstream gradient g on alpha -> gradient on z.
inline Vector simplex_vjp(const Vector& z, const Vector& g, SimplexMode mode) {
  if (mode == SimplexMode::Softmax) {
    Vector e = (z.array() - z.maxCoeff()).exp();
    Vector a = e / e.sum();
    return a.array() * (g.array() - g.dot(a));
  }
  const double eps = 1e-8;
  Vector zp = z.array().max(0.0);
  const double total = zp.sum();
  if (total < eps) return Vector::Zero(z.size());
  Vector a = zp / total;
  const double dot = g.dot(a);
  Vector out = Vector::Zero(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] > 0.0) out[i] = (g[i] - dot) / total;
  return out;
}

// Latent initial condition reproducing alpha0 under the chosen mapping.
inline Vector init_from_weights(const Vector& alpha0, SimplexMode mode) {
  if (mode == SimplexMode::PositivePart) return alpha0;
  const double eps = 1e-6;
  Vector smoothed = alpha0.array() + eps;
  smoothed /= smoothed.sum();
  Vector u = smoothed.array().log();
  // Shift invariance lets us center the logits for numerical comfort.
  return u.array() - u.mean();
}

struct OdeWeightModel {
  VectorFieldMlp field;
  Vector z0;
  double horizon = 1.0;
  double step = 0.01;
  SimplexMode mode = SimplexMode::PositivePart;
  double nu = 1e-10;

  void validate() const {
    if (!(step > 0.0)) throw InputError("OdeWeightModel: h must be > 0");
    if (!(horizon > 0.0)) throw InputError("OdeWeightModel: T must be > 0");
    const double steps = horizon / step;
    if (std::abs(steps - std::round(steps)) > 1e-12 * std::max(1.0, steps))
      throw InputError("OdeWeightModel: h must divide T");
    if (!z0.allFinite() || z0.size() != field.k)
      throw InputError("OdeWeightModel: invalid initial state");
    SimplexVector::from(to_simplex(z0, mode));
  }
};

namespace detail {

struct Rk4Tape {
  Vector z;
  double t = 0, h = 0;
  MlpCache c1, c2, c3, c4;
};

template <class Field>
inline Vector rk4_step(const Field& f, const Vector& z, double t,
                       double h, Rk4Tape* tape = nullptr) {
  MlpCache c1, c2, c3, c4;
  Vector k1 = f.forward(z, t, tape ? &c1 : nullptr);
  Vector k2 = f.forward(z + 0.5 * h * k1, t + 0.5 * h, tape ? &c2 : nullptr);
  Vector k3 = f.forward(z + 0.5 * h * k2, t + 0.5 * h, tape ? &c3 : nullptr);
  Vector k4 = f.forward(z + h * k3, t + h, tape ? &c4 : nullptr);
  Vector zn = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (tape) {
    tape->z = z;
    tape->t = t;
    tape->h = h;
    tape->c1 = std::move(c1);
    tape->c2 = std::move(c2);
    tape->c3 = std::move(c3);
    tape->c4 = std::move(c4);
  }
  return zn;
}

// Reverse one RK4 step: upstream g on z_{n+1} -> gradient on z_n, with the
// parameter gradient accumulated into acc.
inline Vector rk4_step_vjp(const VectorFieldMlp& f, const Rk4Tape& tape,
                           const Vector& g, MlpTensors& acc) {
  const double h = tape.h;
  Vector gk4 = (h / 6.0) * g;
  Vector gz4 = f.vjp(tape.c4, gk4, acc);
  Vector gk3 = (2.0 * h / 6.0) * g + h * gz4;
  Vector gz3 = f.vjp(tape.c3, gk3, acc);
  Vector gk2 = (2.0 * h / 6.0) * g + 0.5 * h * gz3;
  Vector gz2 = f.vjp(tape.c2, gk2, acc);
  Vector gk1 = (h / 6.0) * g + 0.5 * h * gz2;
  Vector gz1 = f.vjp(tape.c1, gk1, acc);
  return g + gz1 + gz2 + gz3 + gz4;
}

}  // namespace detail

// Classic fixed-step RK4 from 0 to t_target (final partial step if needed).
inline Vector rk4_integrate(const OdeWeightModel& model, double t_target) {
  if (t_target < -1e-12 || t_target > model.horizon + 1e-12)
    throw InputError("rk4_integrate: t outside [0, T]");
  Vector z = model.z0;
  double t = 0.0;
  long step_index = 0;
  while (t < t_target - 1e-12) {
    const double h = std::min(model.step, t_target - t);
    z = detail::rk4_step(model.field, z, t, h);
    ++step_index;
    if (!z.allFinite())
      throw NumericalError("rk4_integrate: non-finite state at step " +
                           std::to_string(step_index));
    t += h;
  }
  return z;
}

// alpha(t) = to_simplex(z(t)); no extrapolation outside [0, T].
inline std::vector<Vector> predict_weights(const OdeWeightModel& model,
                                           const std::vector<double>& times) {
  std::vector<Vector> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t < -1e-12 || t > model.horizon + 1e-12)
      throw InputError("predict_weights: t outside [0, T]");
    out.push_back(to_simplex(rk4_integrate(model, t), model.mode));
  }
  return out;
}

inline json ode_model_to_json(const OdeWeightModel& model) {
  json j;
  j["mode"] = simplex_mode_name(model.mode);
  j["T"] = model.horizon;
  j["h"] = model.step;
  j["widths"] = {model.field.k + 1, model.field.width, model.field.width,
                 model.field.k};
  j["activation"] = "tanh";
  j["parameters"] = model.field.flatten();
  j["nu"] = model.nu;
  j["z0"] = std::vector<double>(model.z0.data(), model.z0.data() + model.z0.size());
  return j;
}

inline OdeWeightModel ode_model_from_json(const json& j) {
  try {
    OdeWeightModel m;
    m.mode = simplex_mode_from_name(j.at("mode").get<std::string>());
    m.horizon = j.at("T").get<double>();
    m.step = j.at("h").get<double>();
    std::vector<int> widths = j.at("widths").get<std::vector<int>>();
    if (widths.size() != 4 || widths[1] != widths[2])
      throw ParseError("ode model: unsupported widths");
    m.field.k = widths[3];
    m.field.width = widths[1];
    if (widths[0] != m.field.k + 1)
      throw ParseError("ode model: input width must be K+1");
    m.field.unflatten(j.at("parameters").get<std::vector<double>>());
    if (j.contains("nu")) m.nu = j.at("nu").get<double>();
    std::vector<double> z0 = j.at("z0").get<std::vector<double>>();
    m.z0 = Eigen::Map<const Vector>(z0.data(), static_cast<Eigen::Index>(z0.size()));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("ode model: ") + e.what());
  }
}

}  // namespace distdyn

#pragma once

#include <cmath>
#include <vector>

#include "distdyn/core/types.hpp"

namespace distdyn {

// Parameter gradients (and Adam moments) share the MLP's tensor layout.
struct MlpTensors {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;

  static MlpTensors zeros(int k, int width) {
    MlpTensors t;
    t.w1 = Matrix::Zero(width, k + 1);
    t.b1 = Vector::Zero(width);
    t.w2 = Matrix::Zero(width, width);
    t.b2 = Vector::Zero(width);
    t.w3 = Matrix::Zero(k, width);
    t.b3 = Vector::Zero(k);
    return t;
  }

  void add(const MlpTensors& o) {
    w1 += o.w1; b1 += o.b1;
    w2 += o.w2; b2 += o.b2;
    w3 += o.w3; b3 += o.b3;
  }

  double squared_norm() const {
    return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() +
           b2.squaredNorm() + w3.squaredNorm() + b3.squaredNorm();
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           b2.allFinite() && w3.allFinite() && b3.allFinite();
  }
};

// Stage activations recorded on the forward pass for reverse mode.
struct MlpCache {
  Vector x, a1, a2;
};

// v_phi(z, t): input (z, t) of width K+1, two tanh hidden layers of equal
// width, linear output of width K. Weights start uniform in
// [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases at zero.
struct VectorFieldMlp {
  int k = 0;
  int width = 64;
  MlpTensors p;

  static VectorFieldMlp init(int k, int width, Rng& rng) {
    VectorFieldMlp m;
    m.k = k;
    m.width = width;
    m.p = MlpTensors::zeros(k, width);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(k + 1));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(width));
    for (Eigen::Index i = 0; i < m.p.w1.size(); ++i)
      m.p.w1.data()[i] = rng.uniform(-s1, s1);
    for (Eigen::Index i = 0; i < m.p.w2.size(); ++i)
      m.p.w2.data()[i] = rng.uniform(-s2, s2);
    for (Eigen::Index i = 0; i < m.p.w3.size(); ++i)
      m.p.w3.data()[i] = rng.uniform(-s2, s2);
    return m;
  }

  Vector forward(const Vector& z, double t, MlpCache* cache = nullptr) const {
    Vector x(k + 1);
    x.head(k) = z;
    x[k] = t;
    Vector a1 = (p.w1 * x + p.b1).array().tanh();
    Vector a2 = (p.w2 * a1 + p.b2).array().tanh();
    Vector v = p.w3 * a2 + p.b3;
    if (cache) {
      cache->x = std::move(x);
      cache->a1 = std::move(a1);
      cache->a2 = std::move(a2);
    }
    return v;
  }

  // Reverse pass for upstream gradient g on the output; accumulates the
  // parameter gradient into acc and returns the gradient with respect to z.
  Vector vjp(const MlpCache& c, const Vector& g, MlpTensors& acc) const {
    acc.w3 += g * c.a2.transpose();
    acc.b3 += g;
    Vector d2 = (p.w3.transpose() * g).array() * (1.0 - c.a2.array().square());
    acc.w2 += d2 * c.a1.transpose();
    acc.b2 += d2;
    Vector d1 = (p.w2.transpose() * d2).array() * (1.0 - c.a1.array().square());
    acc.w1 += d1 * c.x.transpose();
    acc.b1 += d1;
    Vector gx = p.w1.transpose() * d1;
    return gx.head(k);
  }

  // Flat parameter order: W1 row-major, b1, W2 row-major, b2, W3 row-major, b3.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(p.w1.size() + p.b1.size() +
                                         p.w2.size() + p.b2.size() +
                                         p.w3.size() + p.b3.size()));
    auto push_matrix = [&out](const Matrix& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index col = 0; col < m.cols(); ++col) out.push_back(m(r, col));
    };
    auto push_vector = [&out](const Vector& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    };
    push_matrix(p.w1); push_vector(p.b1);
    push_matrix(p.w2); push_vector(p.b2);
    push_matrix(p.w3); push_vector(p.b3);
    return out;
  }

  void unflatten(const std::vector<double>& flat) {
    p = MlpTensors::zeros(k, width);
    const std::size_t expect = static_cast<std::size_t>(
        p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size() + p.w3.size() +
        p.b3.size());
    if (flat.size() != expect)
      throw ParseError("VectorFieldMlp: parameter count mismatch");
    std::size_t pos = 0;
    auto pull_matrix = [&flat, &pos](Matrix& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index col = 0; col < m.cols(); ++col) m(r, col) = flat[pos++];
    };
    auto pull_vector = [&flat, &pos](Vector& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = flat[pos++];
    };
    pull_matrix(p.w1); pull_vector(p.b1);
    pull_matrix(p.w2); pull_vector(p.b2);
    pull_matrix(p.w3); pull_vector(p.b3);
  }
};

}  // namespace distdyn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "distdyn/core/json_io.hpp"
#include "distdyn/core/types.hpp"
#include "distdyn/inference/two_sample.hpp"

namespace distdyn {

// Per-arm predicted weight trajectories on a shared inference grid:
// subject_weights[p] is an m x K matrix (rows = grid times, cols =
// components), every row a valid simplex vector.
struct ArmTrajectories {
  int arm_label = 0;
  std::vector<double> grid;
  std::vector<Matrix> subject_weights;

  std::size_t subjects() const { return subject_weights.size(); }
  int components() const {
    return subject_weights.empty() ? 0
                                   : static_cast<int>(subject_weights[0].cols());
  }

  void validate() const {
    if (subject_weights.empty())
      throw InputError("ArmTrajectories: at least one subject required");
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    const Eigen::Index k = subject_weights[0].cols();
    if (m < 1) throw InputError("ArmTrajectories: empty grid");
    for (const Matrix& w : subject_weights) {
      if (w.rows() != m || w.cols() != k)
        throw InputError("ArmTrajectories: trajectory shape mismatch");
      for (Eigen::Index j = 0; j < m; ++j)
        SimplexVector::from(w.row(j).transpose());
    }
  }
};

// Arm schema: {arm, grid:[...], subjects:[[ [w...] per grid time ]...]}
inline json arm_to_json(const ArmTrajectories& arm) {
  arm.validate();
  json j;
  j["arm"] = arm.arm_label;
  j["grid"] = arm.grid;
  json subs = json::array();
  for (const Matrix& w : arm.subject_weights) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        row[static_cast<std::size_t>(c)] = w(r, c);
      rows.push_back(std::move(row));
    }
    subs.push_back(std::move(rows));
  }
  j["subjects"] = std::move(subs);
  return j;
}

inline ArmTrajectories arm_from_json(const json& j) {
  ArmTrajectories arm;
  try {
    arm.arm_label = j.at("arm").get<int>();
    arm.grid = j.at("grid").get<std::vector<double>>();
    for (const auto& sub : j.at("subjects")) {
      if (sub.empty()) throw ParseError("arm: empty subject trajectory");
      const Eigen::Index m = static_cast<Eigen::Index>(sub.size());
      const Eigen::Index k =
          static_cast<Eigen::Index>(sub.begin()->size());
      Matrix w(m, k);
      Eigen::Index r = 0;
      for (const auto& row : sub) {
        auto vals = row.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(vals.size()) != k)
          throw ParseError("arm: ragged trajectory rows");
        for (Eigen::Index c = 0; c < k; ++c)
          w(r, c) = vals[static_cast<std::size_t>(c)];
        ++r;
      }
      arm.subject_weights.push_back(std::move(w));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("arm: ") + e.what());
  }
  arm.validate();
  return arm;
}

// One pointwise test per (component, grid time): the per-cell bandwidth is
// the median heuristic on the pooled cross-arm sample at that cell.
// Ordered component-major, time within component.
inline std::vector<TestResult> pvalue_curves(const ArmTrajectories& arm0,
                                             const ArmTrajectories& arm1,
                                             int B, TestMethod method,
                                             std::uint64_t seed) {
  arm0.validate();
  arm1.validate();
  if (arm0.grid != arm1.grid)
    throw InputError("pvalue_curves: arms must share the inference grid");
  if (arm0.components() != arm1.components())
    throw InputError("pvalue_curves: arms must share K");
  const int k_comp = arm0.components();
  const int m = static_cast<int>(arm0.grid.size());
  const Eigen::Index n0 = static_cast<Eigen::Index>(arm0.subjects());
  const Eigen::Index n1 = static_cast<Eigen::Index>(arm1.subjects());

  std::vector<TestResult> out;
  out.reserve(static_cast<std::size_t>(k_comp * m));
  for (int k = 0; k < k_comp; ++k)
    for (int j = 0; j < m; ++j) {
      Vector x(n0), y(n1);
      for (Eigen::Index p = 0; p < n0; ++p)
        x[p] = arm0.subject_weights[static_cast<std::size_t>(p)](j, k);
      for (Eigen::Index p = 0; p < n1; ++p)
        y[p] = arm1.subject_weights[static_cast<std::size_t>(p)](j, k);
      const double sigma = pooled_bandwidth(x, y);
      TestResult r = (method == TestMethod::Wild)
                         ? wild_bootstrap_pvalue(x, y, sigma, B, seed, k, j)
                         : permutation_pvalue(x, y, sigma, B, seed, k, j);
      r.time = arm0.grid[static_cast<std::size_t>(j)];
      out.push_back(r);
    }
  return out;
}

// CSV with a convenience Bonferroni column (min(1, p * #cells)).
inline std::string test_results_csv(const std::vector<TestResult>& results) {
  std::ostringstream os;
  os.precision(12);
  os << "component,time_index,time,statistic,p_value,p_value_bonferroni,"
        "method,B,seed\n";
  const double cells = static_cast<double>(results.size());
  for (const TestResult& r : results)
    os << r.component << ',' << r.time_index << ',' << r.time << ','
       << r.statistic << ',' << r.p_value << ','
       << std::min(1.0, r.p_value * cells) << ',' << test_method_name(r.method)
       << ',' << r.b << ',' << r.seed << '\n';
  return os.str();
}

// Linear-interpolation empirical quantile (values need not be sorted).
inline double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InputError("empirical_quantile: empty sample");
  if (!(prob >= 0.0 && prob <= 1.0))
    throw InputError("empirical_quantile: prob outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - std::floor(h);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

struct QuantileCurves {
  std::vector<double> grid;
  std::vector<double> probs;
  // values[k](j, p): component k, grid time j, probability p.
  std::vector<Matrix> values;
};

// Pointwise quantiles across subjects of the centered trajectories
// Z_is(t) = alpha_is(t) - alpha_is(0).
inline QuantileCurves centered_quantile_curves(const ArmTrajectories& arm,
                                               const std::vector<double>& probs) {
  arm.validate();
  for (double p : probs)
    if (!(p > 0.0 && p < 1.0))
      throw InputError("centered_quantile_curves: probs must lie in (0,1)");
  const int k_comp = arm.components();
  const int m = static_cast<int>(arm.grid.size());
  const std::size_t n = arm.subjects();

  QuantileCurves out;
  out.grid = arm.grid;
  out.probs = probs;
  out.values.assign(static_cast<std::size_t>(k_comp),
                    Matrix::Zero(m, static_cast<Eigen::Index>(probs.size())));
  std::vector<double> z(n);
  for (int k = 0; k < k_comp; ++k)
    for (int j = 0; j < m; ++j) {
      for (std::size_t p = 0; p < n; ++p)
        z[p] = arm.subject_weights[p](j, k) - arm.subject_weights[p](0, k);
      for (std::size_t q = 0; q < probs.size(); ++q)
        out.values[static_cast<std::size_t>(k)](
            j, static_cast<Eigen::Index>(q)) = empirical_quantile(z, probs[q]);
    }
  return out;
}

inline std::string quantile_curves_csv(const QuantileCurves& curves) {
  std::ostringstream os;
  os.precision(12);
  os << "component,time,prob,value\n";
  for (std::size_t k = 0; k < curves.values.size(); ++k)
    for (std::size_t j = 0; j < curves.grid.size(); ++j)
      for (std::size_t q = 0; q < curves.probs.size(); ++q)
        os << k << ',' << curves.grid[j] << ',' << curves.probs[q] << ','
           << curves.values[k](static_cast<Eigen::Index>(j),
                               static_cast<Eigen::Index>(q))
           << '\n';
  return os.str();
}

}  // namespace distdyn

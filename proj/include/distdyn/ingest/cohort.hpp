#pragma once

#include <string>
#include <vector>

#include "distdyn/ingest/cgm.hpp"
#include "distdyn/kernel/kernel.hpp"
#include "distdyn/mmd_fit/fit.hpp"
#include "distdyn/mmd_fit/objective.hpp"
#include "distdyn/mmd_fit/qp.hpp"

namespace distdyn {

struct CohortFit {
  GaussianDictionary dictionary;
  std::vector<std::string> subject_ids;
  std::vector<std::string> subject_arms;
  std::vector<FittedModel> subject_models;
};

// Pooled reference sample: every subject's first kept window by default,
// or every kept window when pool_all_windows is set.
inline Matrix pooled_reference_sample(const WindowizeReport& report,
                                      bool pool_all_windows) {
  Eigen::Index total = 0;
  Eigen::Index d = 0;
  for (const SubjectWindows& s : report.subjects) {
    d = s.dataset.dimension();
    if (pool_all_windows)
      for (const Matrix& w : s.dataset.snapshots) total += w.rows();
    else
      total += s.dataset.snapshots.front().rows();
  }
  if (total == 0)
    throw InputError("pooled_reference_sample: no usable windows");
  Matrix pooled(total, d);
  Eigen::Index row = 0;
  for (const SubjectWindows& s : report.subjects) {
    if (pool_all_windows) {
      for (const Matrix& w : s.dataset.snapshots) {
        pooled.middleRows(row, w.rows()) = w;
        row += w.rows();
      }
    } else {
      const Matrix& w = s.dataset.snapshots.front();
      pooled.middleRows(row, w.rows()) = w;
      row += w.rows();
    }
  }
  return pooled;
}

// Fit the shared dictionary on the pooled reference sample (a static fit:
// the same pooled snapshot at both grid endpoints), freeze it, then give
// every subject per-window weights from the QP alone.
inline CohortFit fit_cohort(const WindowizeReport& report,
                            const FitConfig& config, bool pool_all_windows) {
  if (report.subjects.empty())
    throw InputError("fit_cohort: no subjects with usable windows");
  const Matrix pooled = pooled_reference_sample(report, pool_all_windows);

  SnapshotDataset reference;
  reference.grid.points = {0.0, 1.0};
  reference.grid.horizon = 1.0;
  reference.snapshots = {pooled, pooled};
  const FitResult reference_fit = fit(reference, config);

  CohortFit out;
  out.dictionary = reference_fit.model.dictionary;
  const Vector lambda = config.ridge_for(config.k);

  for (const SubjectWindows& s : report.subjects) {
    FittedModel model;
    model.dictionary = out.dictionary;
    model.weightTable.grid = s.dataset.grid;
    model.ridge = lambda;
    model.timeUnit = "normalized";
    for (std::size_t w = 0; w < s.dataset.snapshots.size(); ++w) {
      const double sigma = median_heuristic(s.dataset.snapshots[w]);
      model.kernelBandwidths.push_back(sigma);
      const Matrix I = component_gram(out.dictionary, sigma);
      const Vector J = data_cross_term(out.dictionary, sigma,
                                       s.dataset.snapshots[w]);
      model.weightTable.rows.push_back(
          SimplexVector::from(solve_simplex_qp(I, J, lambda).alpha));
    }
    model.validate();
    out.subject_ids.push_back(s.id);
    out.subject_arms.push_back(s.arm);
    out.subject_models.push_back(std::move(model));
  }
  return out;
}

}  // namespace distdyn

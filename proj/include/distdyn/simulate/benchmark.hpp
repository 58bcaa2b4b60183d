#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "distdyn/core/json_io.hpp"
#include "distdyn/core/types.hpp"
#include "distdyn/mmd_fit/fit.hpp"
#include "distdyn/ode_smooth/train.hpp"
#include "distdyn/simulate/dgp.hpp"
#include "distdyn/simulate/kde.hpp"
#include "distdyn/simulate/l2.hpp"

namespace distdyn {

struct DgpSpec {
  int d = 1;
  std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                              0.6, 0.7, 0.8, 0.9, 1.0};
  int replicates = 100;
  std::vector<int> sample_sizes = {20, 50, 100, 200, 300, 500};
  std::uint64_t seed = 0;
  long mc_points = 200000;

  void validate() const {
    if (d < 1) throw InputError("DgpSpec: d >= 1 required");
    if (grid.size() < 2) throw InputError("DgpSpec: grid needs >= 2 points");
    if (replicates < 1) throw InputError("DgpSpec: replicates >= 1 required");
    for (int n : sample_sizes)
      if (n < 2) throw InputError("DgpSpec: all sample sizes must be >= 2");
    if (mc_points < 2) throw InputError("DgpSpec: mc_points >= 2 required");
  }
};

namespace detail {

inline DensityFn model_density_at(const GaussianDictionary& dict,
                                  const SimplexVector& alpha) {
  return [dict, alpha](const Vector& x) {
    return mixture_density(dict, alpha, x);
  };
}

}  // namespace detail

// For each (n, replicate): simulate the process, fit the shared-dictionary
// mixture, smooth the weights with the ODE model, build the KDE baseline,
// and record the pointwise squared-L2 error of all three against the true
// density at every grid time. Replicate r uses seed ^ r; failures are
// recorded as method="error" rows rather than dropped. Dimensions above 3
// use the defensive importance-sampling L2 estimator (the uniform-box
// estimator's variance is unusable there).
inline std::string run_benchmark(const DgpSpec& spec, const FitConfig& fit_config,
                                 const OdeTrainConfig& ode_config = {}) {
  spec.validate();
  std::ostringstream os;
  os.precision(10);
  os << "method,d,n,replicate,t,l2_error,stderr\n";

  for (int n : spec.sample_sizes) {
    for (int rep = 0; rep < spec.replicates; ++rep) {
      const std::uint64_t rep_seed =
          spec.seed ^ static_cast<std::uint64_t>(rep);
      try {
        SnapshotDataset data = dgp_dataset(spec.d, spec.grid, n, rep_seed);

        FitConfig cfg = fit_config;
        cfg.seed = rep_seed;
        FitResult fit_result = fit(data, cfg);
        const GaussianDictionary& dict = fit_result.model.dictionary;

        OdeTrainConfig ode_cfg = ode_config;
        ode_cfg.seed = rep_seed;
        OdeTrainResult ode_result =
            train_ode(fit_result.model.weightTable, ode_cfg);

        KdeBaseline kde = KdeBaseline::fit(data);

        for (std::size_t i = 0; i < spec.grid.size(); ++i) {
          const double t = spec.grid[i];
          const DensityFn truth = [&spec, t](const Vector& x) {
            return dgp_density(spec.d, t, x);
          };
          const SimplexVector& alpha_mmd = fit_result.model.weightTable.rows[i];
          const SimplexVector alpha_ode = SimplexVector::from(
              predict_weights(ode_result.model, {t}).front());
          const DensityFn f_mmd = detail::model_density_at(dict, alpha_mmd);
          const DensityFn f_ode = detail::model_density_at(dict, alpha_ode);
          const DensityFn f_kde = [&kde, t](const Vector& x) {
            return kde.density(t, x);
          };

          const std::uint64_t mc_seed =
              counter_hash(spec.seed, static_cast<std::uint64_t>(n),
                           static_cast<std::uint64_t>(rep),
                           static_cast<std::uint64_t>(i));
          auto estimate = [&](const DensityFn& f,
                              std::uint64_t salt) -> McEstimate {
            if (spec.d > 3)
              return l2_error_dgp_is(f, spec.d, t, spec.mc_points,
                                     mc_seed ^ salt);
            return l2_error(f, truth, spec.d, t, spec.mc_points,
                            mc_seed ^ salt);
          };
          const McEstimate e_mmd = estimate(f_mmd, 1);
          const McEstimate e_ode = estimate(f_ode, 2);
          const McEstimate e_kde = estimate(f_kde, 3);
          os << "mmd," << spec.d << ',' << n << ',' << rep << ',' << t << ','
             << e_mmd.value << ',' << e_mmd.se << '\n';
          os << "ode," << spec.d << ',' << n << ',' << rep << ',' << t << ','
             << e_ode.value << ',' << e_ode.se << '\n';
          os << "kde," << spec.d << ',' << n << ',' << rep << ',' << t << ','
             << e_kde.value << ',' << e_kde.se << '\n';
        }
      } catch (const std::exception& e) {
        std::string reason = e.what();
        for (char& c : reason)
          if (c == ',' || c == '\n') c = ';';
        os << "error," << spec.d << ',' << n << ',' << rep << ",nan,nan,"
           << reason << '\n';
      }
    }
  }
  return os.str();
}

inline std::string run_benchmark(const DgpSpec& spec, const FitConfig& fit_config,
                                 const std::string& out_path,
                                 const OdeTrainConfig& ode_config = {}) {
  std::string csv = run_benchmark(spec, fit_config, ode_config);
  write_text_file(out_path, csv);
  return csv;
}

}  // namespace distdyn

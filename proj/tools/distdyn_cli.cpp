// distdyn: learn the continuous-time evolution of a distribution from
// snapshot samples. Subcommands: simulate, fit, test, ingest, eval-density.
#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "distdyn/core/json_io.hpp"
#include "distdyn/core/types.hpp"
#include "distdyn/inference/curves.hpp"
#include "distdyn/ingest/cgm.hpp"
#include "distdyn/ingest/cohort.hpp"
#include "distdyn/mmd_fit/fit.hpp"
#include "distdyn/ode_smooth/model.hpp"
#include "distdyn/ode_smooth/train.hpp"
#include "distdyn/simulate/benchmark.hpp"

namespace fs = std::filesystem;
using namespace distdyn;

namespace {

struct GlobalOpts {
  std::string out = "out";
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = machine parallelism
};

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    xs[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  xs.front() = lo;
  xs.back() = hi;
  return xs;
}

std::string sanitize_filename(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
      c = '_';
  return s.empty() ? std::string("_") : s;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
}

// Self-validation: every emitted CSV must re-parse under its declared
// schema (exact header, fixed field count, no empty fields).
void validate_csv(const std::string& path, const std::string& text,
                  const std::string& header, std::size_t fields) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != header)
    throw NumericalError("csv self-validation failed: " + path +
                         ": unexpected header");
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t count = 1;
    bool empty_field = line.front() == ',' || line.back() == ',';
    for (std::size_t i = 0; i + 1 < line.size(); ++i)
      if (line[i] == ',') {
        ++count;
        if (line[i + 1] == ',') empty_field = true;
      }
    if (line.back() == ',') ++count;
    if (count != fields || empty_field)
      throw NumericalError("csv self-validation failed: " + path + ": line " +
                           std::to_string(line_no));
  }
}

void emit_csv(const fs::path& path, const std::string& text,
              const std::string& header, std::size_t fields) {
  validate_csv(path.string(), text, header, fields);
  write_text_file(path.string(), text);
  std::cout << "wrote " << path.string() << "\n";
}

void emit_json(const fs::path& path, const json& j) {
  write_text_file(path.string(), j.dump(2) + "\n");
  std::cout << "wrote " << path.string() << "\n";
}

std::string weight_table_csv(const WeightTable& table) {
  std::ostringstream os;
  os.precision(12);
  os << "time,component,weight\n";
  for (std::size_t i = 0; i < table.grid.points.size(); ++i)
    for (Eigen::Index k = 0; k < table.rows[i].weights.size(); ++k)
      os << table.grid.points[i] << ',' << k << ','
         << table.rows[i].weights[k] << '\n';
  return os.str();
}

std::string trajectory_csv(const OdeWeightModel& model, int n_times) {
  const std::vector<double> times = linspace(0.0, model.horizon, n_times);
  const std::vector<Vector> alphas = predict_weights(model, times);
  std::ostringstream os;
  os.precision(12);
  os << "time,component,weight\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    for (Eigen::Index k = 0; k < alphas[i].size(); ++k)
      os << times[i] << ',' << k << ',' << alphas[i][k] << '\n';
  return os.str();
}

std::string pair_trace_csv(const std::vector<std::pair<int, double>>& trace,
                           const std::string& header) {
  std::ostringstream os;
  os.precision(12);
  os << header << '\n';
  for (const auto& [i, v] : trace) os << i << ',' << v << '\n';
  return os.str();
}

// Mean L2 per (method, n, t) over replicates, skipping error rows.
std::string benchmark_summary_csv(const std::string& benchmark_csv) {
  std::istringstream is(benchmark_csv);
  std::string line;
  std::getline(is, line);  // header
  std::map<std::tuple<std::string, int, double>, std::pair<double, long>> acc;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string method, d, n, rep, t, l2, se;
    std::getline(row, method, ',');
    std::getline(row, d, ',');
    std::getline(row, n, ',');
    std::getline(row, rep, ',');
    std::getline(row, t, ',');
    std::getline(row, l2, ',');
    std::getline(row, se, ',');
    if (method == "error") continue;
    auto& slot = acc[{method, std::stoi(n), std::stod(t)}];
    slot.first += std::stod(l2);
    slot.second += 1;
  }
  std::ostringstream os;
  os.precision(10);
  os << "method,n,t,mean_l2,replicates\n";
  for (const auto& [key, slot] : acc)
    os << std::get<0>(key) << ',' << std::get<1>(key) << ','
       << std::get<2>(key) << ',' << slot.first / static_cast<double>(slot.second)
       << ',' << slot.second << '\n';
  return os.str();
}

struct CgmOpts {
  WindowSpec window;
  std::string mode = "bivariate";
  bool pool_all_windows = false;
  double window_days = 7.0;
};

void add_fit_options(CLI::App* cmd, FitConfig& cfg) {
  cmd->add_option("--k", cfg.k, "number of dictionary components")
      ->capture_default_str();
  cmd->add_option("--lambda", cfg.ridge, "QP ridge penalty")
      ->capture_default_str();
  cmd->add_option("--outer", cfg.outer_iterations,
                  "outer alternating rounds (QP + dictionary update)")
      ->capture_default_str();
  cmd->add_option("--inner", cfg.inner_steps,
                  "Adam steps per dictionary update")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.learning_rate, "dictionary Adam learning rate")
      ->capture_default_str();
  cmd->add_option("--restarts", cfg.kmeans_restarts,
                  "k-means++ initialization restarts")
      ->capture_default_str();
}

void add_ode_options(CLI::App* cmd, OdeTrainConfig& cfg,
                     CLI::Option** step_opt = nullptr) {
  cmd->add_option("--ode-epochs", cfg.epochs, "ODE training epochs")
      ->capture_default_str();
  cmd->add_option("--ode-lr", cfg.learning_rate, "ODE Adam learning rate")
      ->capture_default_str();
  cmd->add_option("--ode-width", cfg.width, "ODE field hidden width")
      ->capture_default_str();
  CLI::Option* o =
      cmd->add_option("--ode-step", cfg.step, "RK4 step size")
          ->capture_default_str();
  if (step_opt) *step_opt = o;
  cmd->add_option("--ode-nu", cfg.nu, "ODE parameter ridge")
      ->capture_default_str();
  cmd->add_option_function<std::string>(
         "--ode-mode",
         [&cfg](const std::string& name) {
           cfg.mode = simplex_mode_from_name(name);
         },
         "simplex map: positive-part or softmax")
      ->default_str(simplex_mode_name(cfg.mode));
}

void add_cgm_options(CLI::App* cmd, CgmOpts& opts) {
  cmd->add_option("--cgm-mode", opts.mode,
                  "snapshot coordinates: bivariate (G,V) or univariate (G)")
      ->capture_default_str();
  cmd->add_option("--window-days", opts.window_days, "window length in days")
      ->capture_default_str();
  cmd->add_option("--interval-minutes", opts.window.sampling_interval,
                  "nominal sampling interval in minutes")
      ->capture_default_str();
  cmd->add_option("--max-gap-multiplier", opts.window.max_gap_multiplier,
                  "drop pairs with gaps above multiplier * interval")
      ->capture_default_str();
  cmd->add_option("--min-count", opts.window.min_count,
                  "minimum pairs for a window to be kept")
      ->capture_default_str();
  cmd->add_flag("--pool-all-windows", opts.pool_all_windows,
                "pool every kept window (not just the first) for the "
                "shared dictionary");
}

CgmMode cgm_mode_from_name(const std::string& name) {
  if (name == "bivariate") return CgmMode::Bivariate;
  if (name == "univariate") return CgmMode::Univariate;
  throw InputError("unknown --cgm-mode: " + name);
}

void prepare_out_dir(const GlobalOpts& g) {
  std::error_code ec;
  fs::create_directories(g.out, ec);
  if (ec || !fs::is_directory(g.out))
    throw InputError("cannot create output directory: " + g.out);
}

void echo_config(const CLI::App& app, const GlobalOpts& g) {
  write_text_file((fs::path(g.out) / "config_echo.toml").string(),
                  app.config_to_str(true, true));
}

// ---------------------------------------------------------------- simulate

int run_simulate(const CLI::App& app, const GlobalOpts& g, DgpSpec& spec,
                 FitConfig& fit_cfg, OdeTrainConfig& ode_cfg) {
  spec.seed = g.seed;
  fit_cfg.seed = g.seed;
  ode_cfg.seed = g.seed;
  spec.validate();
  prepare_out_dir(g);

  const std::string csv = run_benchmark(spec, fit_cfg, ode_cfg);
  emit_csv(fs::path(g.out) / "benchmark.csv", csv,
           "method,d,n,replicate,t,l2_error,stderr", 7);
  emit_csv(fs::path(g.out) / "benchmark_summary.csv",
           benchmark_summary_csv(csv), "method,n,t,mean_l2,replicates", 5);
  echo_config(app, g);
  return 0;
}

// --------------------------------------------------------------------- fit

void write_fit_outputs(const fs::path& out, const FitResult& result,
                       const OdeTrainResult& ode) {
  json j = model_to_json(result.model);
  j["ode"] = ode_model_to_json(ode.model);
  model_from_json(j).validate();  // self-validation before writing
  emit_json(out / "model.json", j);
  emit_csv(out / "weights.csv", weight_table_csv(result.model.weightTable),
           "time,component,weight", 3);
  emit_csv(out / "trajectories.csv", trajectory_csv(ode.model, 200),
           "time,component,weight", 3);
  emit_csv(out / "objective_trace.csv",
           pair_trace_csv(result.trace, "outer_iter,total_objective"),
           "outer_iter,total_objective", 2);
  emit_csv(out / "ode_loss.csv", pair_trace_csv(ode.loss_trace, "epoch,loss"),
           "epoch,loss", 2);

  // surface the grid-point reproduction error of the trained ODE
  const std::vector<Vector> pred =
      predict_weights(ode.model, result.model.weightTable.grid.points);
  double worst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    worst = std::max(
        worst,
        (pred[i] - result.model.weightTable.rows[i].weights).norm());
  std::cout << "grid-point reproduction: max l2 deviation " << worst << "\n";
}

int run_fit_dataset(const CLI::App& app, const GlobalOpts& g,
                    const std::string& input, FitConfig& fit_cfg,
                    OdeTrainConfig& ode_cfg, bool step_given) {
  const SnapshotDataset dataset = dataset_from_json(parse_json_file(input));
  prepare_out_dir(g);

  const FitResult result = fit(dataset, fit_cfg);
  ode_cfg.horizon = dataset.grid.horizon;
  if (!step_given) ode_cfg.step = dataset.grid.horizon / 100.0;
  const OdeTrainResult ode = train_ode(result.model.weightTable, ode_cfg);

  write_fit_outputs(fs::path(g.out), result, ode);
  echo_config(app, g);
  return 0;
}

int run_fit_cohort(const CLI::App& app, const GlobalOpts& g,
                   const std::string& input, FitConfig& fit_cfg,
                   OdeTrainConfig& ode_cfg, const CgmOpts& cgm) {
  const std::vector<CgmSeries> series = parse_cgm_csv(input);
  WindowSpec wspec = cgm.window;
  wspec.window_minutes = cgm.window_days * 24.0 * 60.0;
  const WindowizeReport report =
      windowize(series, wspec, cgm_mode_from_name(cgm.mode));
  const CohortFit cohort = fit_cohort(report, fit_cfg, cgm.pool_all_windows);

  prepare_out_dir(g);
  fs::create_directories(fs::path(g.out) / "subjects");

  // per-subject ODE smoothing on the subject's own weight table, then
  // evaluation on a common 21-point grid for arm-level inference
  const std::vector<double> common_grid = linspace(0.0, 1.0, 21);
  std::vector<std::string> arm_names;
  std::vector<ArmTrajectories> arms;
  for (std::size_t i = 0; i < cohort.subject_models.size(); ++i) {
    const FittedModel& model = cohort.subject_models[i];
    OdeTrainConfig cfg = ode_cfg;
    cfg.seed = g.seed + static_cast<std::uint64_t>(i);
    const OdeTrainResult ode = train_ode(model.weightTable, cfg);

    json j = model_to_json(model);
    j["id"] = cohort.subject_ids[i];
    j["arm"] = cohort.subject_arms[i];
    j["ode"] = ode_model_to_json(ode.model);
    emit_json(fs::path(g.out) / "subjects" /
                  (sanitize_filename(cohort.subject_ids[i]) + ".json"),
              j);

    const std::vector<Vector> pred = predict_weights(ode.model, common_grid);
    Matrix w(static_cast<Eigen::Index>(common_grid.size()), pred[0].size());
    for (std::size_t t = 0; t < pred.size(); ++t)
      w.row(static_cast<Eigen::Index>(t)) = pred[t].transpose();

    const auto it =
        std::find(arm_names.begin(), arm_names.end(), cohort.subject_arms[i]);
    std::size_t a = static_cast<std::size_t>(it - arm_names.begin());
    if (it == arm_names.end()) {
      arm_names.push_back(cohort.subject_arms[i]);
      ArmTrajectories arm;
      arm.arm_label = static_cast<int>(a);
      arm.grid = common_grid;
      arms.push_back(std::move(arm));
    }
    arms[a].subject_weights.push_back(std::move(w));
  }

  json manifest = cohort_manifest(report);
  json arm_list = json::array();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const std::string file = "arm" + std::to_string(a) + ".json";
    emit_json(fs::path(g.out) / file, arm_to_json(arms[a]));
    arm_list.push_back({{"label", static_cast<int>(a)},
                        {"name", arm_names[a]},
                        {"file", file},
                        {"subjects", arms[a].subject_weights.size()}});
  }
  manifest["arms"] = arm_list;
  emit_json(fs::path(g.out) / "manifest.json", manifest);

  std::cout << "cohort: " << report.subjects.size() << " subjects kept, "
            << report.excluded.size() << " excluded\n";
  echo_config(app, g);
  return 0;
}

// -------------------------------------------------------------------- test

int run_test(const CLI::App& app, const GlobalOpts& g,
             const std::string& arm0_path, const std::string& arm1_path,
             int B, const std::string& method_name, double level,
             std::vector<double>& probs, int quantile_arm) {
  if (!(level > 0.0 && level < 1.0))
    throw InputError("test: --level must lie in (0, 1)");
  if (quantile_arm != 0 && quantile_arm != 1)
    throw InputError("test: --quantile-arm must be 0 or 1");
  const TestMethod method = test_method_from_name(method_name);
  const ArmTrajectories arm0 = arm_from_json(parse_json_file(arm0_path));
  const ArmTrajectories arm1 = arm_from_json(parse_json_file(arm1_path));
  prepare_out_dir(g);

  const std::vector<TestResult> results =
      pvalue_curves(arm0, arm1, B, method, g.seed);
  emit_csv(fs::path(g.out) / "inference.csv", test_results_csv(results),
           "component,time_index,time,statistic,p_value,p_value_bonferroni,"
           "method,B,seed",
           9);

  const ArmTrajectories& qarm = quantile_arm == 0 ? arm0 : arm1;
  const QuantileCurves curves = centered_quantile_curves(qarm, probs);
  emit_csv(fs::path(g.out) / "quantiles.csv", quantile_curves_csv(curves),
           "component,time,prob,value", 4);

  long significant = 0;
  for (const TestResult& r : results)
    if (r.p_value <= level) ++significant;
  std::cout << "cells: " << results.size() << ", significant at " << level
            << ": " << significant << "\n";
  echo_config(app, g);
  return 0;
}

// ------------------------------------------------------------------ ingest

int run_ingest(const CLI::App& app, const GlobalOpts& g,
               const std::string& input, const CgmOpts& cgm) {
  const std::vector<CgmSeries> series = parse_cgm_csv(input);
  WindowSpec wspec = cgm.window;
  wspec.window_minutes = cgm.window_days * 24.0 * 60.0;
  const WindowizeReport report =
      windowize(series, wspec, cgm_mode_from_name(cgm.mode));

  prepare_out_dir(g);
  fs::create_directories(fs::path(g.out) / "subjects");
  for (const SubjectWindows& s : report.subjects) {
    json j;
    j["id"] = s.id;
    j["arm"] = s.arm;
    j["window_counts"] = s.window_counts;
    j["dropped_pairs"] = s.dropped_pairs;
    j["excluded_pairs"] = s.excluded_pairs;
    j["total_pairs"] = s.total_pairs;
    j["dataset"] = dataset_to_json(s.dataset);
    emit_json(fs::path(g.out) / "subjects" /
                  (sanitize_filename(s.id) + ".json"),
              j);
  }
  emit_json(fs::path(g.out) / "manifest.json", cohort_manifest(report));
  std::cout << "ingested " << report.subjects.size() << " subjects ("
            << report.excluded.size() << " excluded)\n";
  echo_config(app, g);
  return 0;
}

// ------------------------------------------------------------ eval-density

int run_eval_density(const CLI::App& app, const GlobalOpts& g,
                     const std::string& model_path, double time, int points,
                     std::vector<double>& xlim, std::vector<double>& ylim) {
  const json j = parse_json_file(model_path);
  const FittedModel model = model_from_json(j);
  if (points == 0) points = model.dictionary.dimension() == 1 ? 200 : 100;
  if (points < 2) throw InputError("eval-density: --points must be >= 2");

  // weights at the requested time: the smoothed trajectory when the model
  // carries one, otherwise the nearest weight-table row
  SimplexVector alpha;
  if (j.contains("ode")) {
    const OdeWeightModel ode = ode_model_from_json(j.at("ode"));
    alpha = SimplexVector::from(predict_weights(ode, {time})[0]);
  } else {
    const std::vector<double>& grid = model.weightTable.grid.points;
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (std::abs(grid[i] - time) < std::abs(grid[best] - time)) best = i;
    alpha = model.weightTable.rows[best];
  }

  const Eigen::Index d = model.dictionary.dimension();
  if (d > 2)
    throw InputError("eval-density: evaluation grids support d <= 2 only");

  // default axis limits: component means +/- 4 standard deviations
  auto default_lim = [&model](Eigen::Index axis) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const GaussianComponent& c : model.dictionary.components) {
      const double sd = std::sqrt(c.covariance()(axis, axis));
      lo = std::min(lo, c.mean[axis] - 4.0 * sd);
      hi = std::max(hi, c.mean[axis] + 4.0 * sd);
    }
    return std::pair<double, double>(lo, hi);
  };
  auto resolve = [&](std::vector<double>& lim, Eigen::Index axis) {
    if (lim.empty()) {
      const auto [lo, hi] = default_lim(axis);
      lim = {lo, hi};
    }
    if (lim.size() != 2 || !(lim[0] < lim[1]))
      throw InputError("eval-density: axis limits must be two values lo < hi");
  };
  resolve(xlim, 0);

  prepare_out_dir(g);
  std::ostringstream os;
  os.precision(12);
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  if (d == 1) {
    os << "x,density\n";
    for (double x : linspace(xlim[0], xlim[1], points)) {
      Vector p(1);
      p << x;
      const double f = mixture_density(model.dictionary, alpha, p);
      fmin = std::min(fmin, f);
      fmax = std::max(fmax, f);
      os << x << ',' << f << '\n';
    }
    emit_csv(fs::path(g.out) / "density.csv", os.str(), "x,density", 2);
  } else {
    resolve(ylim, 1);
    os << "x,y,density\n";
    for (double x : linspace(xlim[0], xlim[1], points))
      for (double y : linspace(ylim[0], ylim[1], points)) {
        Vector p(2);
        p << x, y;
        const double f = mixture_density(model.dictionary, alpha, p);
        fmin = std::min(fmin, f);
        fmax = std::max(fmax, f);
        os << x << ',' << y << ',' << f << '\n';
      }
    emit_csv(fs::path(g.out) / "density.csv", os.str(), "x,y,density", 3);
  }
  std::cout << "density range: [" << fmin << ", " << fmax << "]\n";
  echo_config(app, g);
  return 0;
}

void print_error_json(const std::string& type, const std::string& message) {
  json e;
  e["error"]["type"] = type;
  e["error"]["message"] = message;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "distdyn: distribution dynamics from snapshot samples "
      "(shared-dictionary mixture fits, ODE-smoothed weights, "
      "kernel two-sample inference)"};
  app.set_config("--config", "", "TOML config file (flags win over file)");
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "master RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads,
                 "cap worker parallelism (0 = machine parallelism)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  // simulate
  CLI::App* sim = app.add_subcommand(
      "simulate", "benchmark the pipeline against the synthetic process");
  DgpSpec spec;
  FitConfig sim_fit;
  OdeTrainConfig sim_ode;
  sim->add_option("--d", spec.d, "dimension")->capture_default_str();
  sim->add_option("--replicates", spec.replicates, "independent replicates")
      ->capture_default_str();
  sim->add_option("--n", spec.sample_sizes, "per-time sample sizes");
  sim->add_option("--grid", spec.grid, "evaluation time grid");
  sim->add_option("--mc-points", spec.mc_points,
                  "Monte Carlo points for the L2 error")
      ->capture_default_str();
  add_fit_options(sim, sim_fit);
  add_ode_options(sim, sim_ode);

  // fit
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "fit the shared-dictionary mixture and smooth its weights");
  std::string fit_input;
  FitConfig fit_cfg;
  OdeTrainConfig fit_ode;
  CgmOpts fit_cgm;
  CLI::Option* fit_step_opt = nullptr;
  fit_cmd->add_option("--input", fit_input,
                      "snapshot dataset (.json) or cohort readings (.csv)")
      ->required();
  add_fit_options(fit_cmd, fit_cfg);
  add_ode_options(fit_cmd, fit_ode, &fit_step_opt);
  add_cgm_options(fit_cmd, fit_cgm);

  // test
  CLI::App* test_cmd = app.add_subcommand(
      "test", "two-sample inference between two arms' trajectories");
  std::string arm0_path, arm1_path, method_name = "wild";
  int B = 1000, quantile_arm = 1;
  double level = 0.05;
  std::vector<double> probs = {0.05, 0.25, 0.5, 0.75, 0.95};
  test_cmd->add_option("--arm0", arm0_path, "first arm trajectories JSON")
      ->required();
  test_cmd->add_option("--arm1", arm1_path, "second arm trajectories JSON")
      ->required();
  test_cmd->add_option("--b", B, "bootstrap/permutation replicates")
      ->capture_default_str();
  test_cmd->add_option("--method", method_name, "wild or permutation")
      ->capture_default_str();
  test_cmd->add_option("--level", level, "significance level for the summary")
      ->capture_default_str();
  test_cmd->add_option("--probs", probs, "quantile probabilities in (0,1)");
  test_cmd
      ->add_option("--quantile-arm", quantile_arm,
                   "arm whose centered quantile curves are emitted (0 or 1)")
      ->capture_default_str();

  // ingest
  CLI::App* ingest_cmd = app.add_subcommand(
      "ingest", "window CGM readings into per-subject snapshot datasets");
  std::string ingest_input;
  CgmOpts ingest_cgm;
  ingest_cmd->add_option("--input", ingest_input, "cohort readings CSV")
      ->required();
  add_cgm_options(ingest_cmd, ingest_cgm);

  // eval-density
  CLI::App* eval_cmd = app.add_subcommand(
      "eval-density", "evaluate a fitted mixture density on a grid");
  std::string model_path;
  double eval_time = 0.0;
  int eval_points = 0;
  std::vector<double> xlim, ylim;
  eval_cmd->add_option("--model", model_path, "fitted model JSON")->required();
  eval_cmd->add_option("--time", eval_time, "evaluation time")->required();
  eval_cmd->add_option("--points", eval_points,
                       "grid points per axis (default 200 for d=1, 100 for d=2)");
  eval_cmd->add_option("--xlim", xlim,
                       "first-axis limits as --xlim LO HI (default: component "
                       "means +/- 4 sd)")
      ->expected(2);
  eval_cmd->add_option("--ylim", ylim, "second-axis limits as --ylim LO HI")
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error_json("cli", e.what());
    return 2;
  } catch (const InputError& e) {
    // option callbacks (e.g. --ode-mode) validate eagerly during parse
    print_error_json("input", e.what());
    return 2;
  } catch (const ParseError& e) {
    print_error_json("parse", e.what());
    return 2;
  }

  try {
    if (sim->parsed()) return run_simulate(app, g, spec, sim_fit, sim_ode);
    if (fit_cmd->parsed()) {
      fit_cfg.seed = g.seed;
      fit_ode.seed = g.seed;
      const bool step_given = fit_step_opt && fit_step_opt->count() > 0;
      if (fit_input.size() >= 4 &&
          fit_input.substr(fit_input.size() - 4) == ".csv")
        return run_fit_cohort(app, g, fit_input, fit_cfg, fit_ode, fit_cgm);
      if (fit_input.size() >= 5 &&
          fit_input.substr(fit_input.size() - 5) == ".json")
        return run_fit_dataset(app, g, fit_input, fit_cfg, fit_ode,
                               step_given);
      throw InputError("fit: --input must end in .json or .csv");
    }
    if (test_cmd->parsed())
      return run_test(app, g, arm0_path, arm1_path, B, method_name, level,
                      probs, quantile_arm);
    if (ingest_cmd->parsed()) return run_ingest(app, g, ingest_input, ingest_cgm);
    if (eval_cmd->parsed())
      return run_eval_density(app, g, model_path, eval_time, eval_points,
                              xlim, ylim);
    throw InputError("no subcommand given");
  } catch (const InputError& e) {
    print_error_json("input", e.what());
    return 2;
  } catch (const ParseError& e) {
    print_error_json("parse", e.what());
    return 2;
  } catch (const NumericalError& e) {
    print_error_json("numerical", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error_json("runtime", e.what());
    return 1;
  }
}

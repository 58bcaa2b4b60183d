#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "distdyn/core/json_io.hpp"
#include "distdyn/ingest/cgm.hpp"
#include "distdyn/ingest/cohort.hpp"

using namespace distdyn;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kHeader = "subject_id,arm,timestamp_minutes,glucose_mgdl\n";

std::string rows_csv(const std::vector<std::string>& rows) {
  std::string text = kHeader;
  for (const std::string& r : rows) text += r + "\n";
  return text;
}

// Dense 5-minute readings covering [first, last] minutes for one subject.
std::string dense_subject(const std::string& id, const std::string& arm,
                          double first, double last, double base = 100.0) {
  std::ostringstream os;
  os.precision(12);
  for (double t = first; t <= last + 1e-9; t += 5.0)
    os << id << ',' << arm << ',' << t << ','
       << base + 20.0 * std::sin(2.0 * M_PI * t / 1440.0) << '\n';
  return os.str();
}

}  // namespace

TEST_CASE("parse_cgm_csv_text: basic parse and grouping", "[ingest]") {
  const std::string text = rows_csv({"s1,treated,0,100", "s1,treated,5,110",
                                     "s2,control,0,95", "s1,treated,10,105"});
  const std::vector<CgmSeries> series = parse_cgm_csv_text(text);
  REQUIRE(series.size() == 2);
  REQUIRE(series[0].subject_id == "s1");
  REQUIRE(series[0].arm == "treated");
  REQUIRE(series[0].timestamps == std::vector<double>{0.0, 5.0, 10.0});
  REQUIRE(series[0].glucose == std::vector<double>{100.0, 110.0, 105.0});
  REQUIRE(series[1].subject_id == "s2");
  REQUIRE(series[1].arm == "control");

  // whitespace around fields is tolerated
  const std::vector<CgmSeries> ws =
      parse_cgm_csv_text(rows_csv({" s1 , a , 0 , 100 ", " s1 , a , 5 , 101 "}));
  REQUIRE(ws[0].subject_id == "s1");
  REQUIRE(ws[0].arm == "a");
}

TEST_CASE("parse_cgm_csv_text: malformed input", "[ingest]") {
  REQUIRE_THROWS_AS(parse_cgm_csv_text(""), ParseError);
  REQUIRE_THROWS_WITH(
      parse_cgm_csv_text("subject,arm,timestamp_minutes,glucose_mgdl\n"),
      ContainsSubstring("header"));
  REQUIRE_THROWS_WITH(parse_cgm_csv_text(rows_csv({"s1,a,0"})),
                      ContainsSubstring("line 2"));
  REQUIRE_THROWS_WITH(parse_cgm_csv_text(rows_csv({"s1,a,zero,100"})),
                      ContainsSubstring("non-numeric"));
  REQUIRE_THROWS_WITH(parse_cgm_csv_text(rows_csv({"s1,a,0,-5"})),
                      ContainsSubstring("glucose"));
  REQUIRE_THROWS_WITH(
      parse_cgm_csv_text(rows_csv({"s1,a,0,100", "s1,a,0,101"})),
      ContainsSubstring("duplicate timestamp"));
  REQUIRE_THROWS_WITH(
      parse_cgm_csv_text(rows_csv({"s1,a,5,100", "s1,a,0,101"})),
      ContainsSubstring("non-monotone"));
  REQUIRE_THROWS_WITH(
      parse_cgm_csv_text(rows_csv({"s1,a,0,100", "s1,b,5,101"})),
      ContainsSubstring("conflicting arm"));
  // the offending line number is reported
  REQUIRE_THROWS_WITH(
      parse_cgm_csv_text(rows_csv({"s1,a,0,100", "s1,a,5,101", "s1,a,5,99"})),
      ContainsSubstring("line 4"));
}

TEST_CASE("cgm csv round-trips through the writer", "[ingest]") {
  const std::string text = rows_csv(
      {"s1,treated,0,100.5", "s1,treated,5.25,110.125", "s2,control,3,95"});
  const std::vector<CgmSeries> series = parse_cgm_csv_text(text);
  const std::vector<CgmSeries> back =
      parse_cgm_csv_text(cgm_series_to_csv(series));
  REQUIRE(back.size() == series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    REQUIRE(back[i].subject_id == series[i].subject_id);
    REQUIRE(back[i].arm == series[i].arm);
    REQUIRE(back[i].timestamps == series[i].timestamps);
    REQUIRE(back[i].glucose == series[i].glucose);
  }

  // file-based entry point
  const std::string path = "/tmp/distdyn_test_cgm.csv";
  write_text_file(path, text);
  const std::vector<CgmSeries> from_file = parse_cgm_csv(path);
  REQUIRE(from_file.size() == series.size());
  std::remove(path.c_str());
}

TEST_CASE("rate_of_change: finite differences attach to the right endpoint",
          "[ingest]") {
  WindowSpec spec;
  spec.sampling_interval = 5.0;
  spec.max_gap_multiplier = 3.0;

  CgmSeries s;
  s.subject_id = "s1";
  s.arm = "a";
  s.timestamps = {0.0, 5.0};
  s.glucose = {100.0, 110.0};
  const RatePairs rp = rate_of_change(s, spec);
  REQUIRE(rp.pairs.rows() == 1);
  REQUIRE(rp.times == std::vector<double>{5.0});
  REQUIRE(rp.pairs(0, 0) == 110.0);  // glucose at the right endpoint
  REQUIRE(rp.pairs(0, 1) == Approx(2.0).margin(1e-15));
  REQUIRE(rp.dropped == 0);

  // constant series: zero rates
  CgmSeries c;
  c.subject_id = "s2";
  c.arm = "a";
  for (int i = 0; i < 5; ++i) {
    c.timestamps.push_back(5.0 * i);
    c.glucose.push_back(120.0);
  }
  const RatePairs rc = rate_of_change(c, spec);
  REQUIRE(rc.pairs.rows() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) REQUIRE(rc.pairs(i, 1) == 0.0);

  // a 60-minute gap against a 15-minute cap drops exactly that pair
  CgmSeries g;
  g.subject_id = "s3";
  g.arm = "a";
  g.timestamps = {0.0, 5.0, 65.0, 70.0};
  g.glucose = {100.0, 105.0, 120.0, 125.0};
  const RatePairs rg = rate_of_change(g, spec);
  REQUIRE(rg.dropped == 1);
  REQUIRE(rg.times == std::vector<double>{5.0, 70.0});

  CgmSeries one;
  one.subject_id = "s4";
  one.arm = "a";
  one.timestamps = {0.0};
  one.glucose = {100.0};
  REQUIRE_THROWS_AS(rate_of_change(one, spec), InputError);
}

TEST_CASE("windowize: 26 weeks of dense readings give 26 windows", "[ingest]") {
  const double week = 7.0 * 24.0 * 60.0;
  const std::string text =
      std::string(kHeader) + dense_subject("s1", "treated", 0.0, 26.0 * week);
  const std::vector<CgmSeries> series = parse_cgm_csv_text(text);

  WindowSpec spec;  // defaults: 7-day windows, 5-minute cadence, min 50
  const WindowizeReport report = windowize(series, spec, CgmMode::Bivariate);
  REQUIRE(report.subjects.size() == 1);
  REQUIRE(report.excluded.empty());

  const SubjectWindows& sw = report.subjects[0];
  REQUIRE(sw.dataset.snapshots.size() == 26);
  REQUIRE(sw.dataset.dimension() == 2);
  REQUIRE(sw.dropped_pairs == 0);
  REQUIRE(sw.excluded_pairs >= 0);

  // normalized kept-window midpoints: equally spaced from 0 to 1
  REQUIRE(sw.dataset.grid.points.front() == 0.0);
  REQUIRE(sw.dataset.grid.points.back() == 1.0);
  for (std::size_t i = 0; i < 26; ++i)
    REQUIRE(sw.dataset.grid.points[i] ==
            Approx(static_cast<double>(i) / 25.0).margin(1e-12));

  // pair conservation: attempted = kept + dropped + excluded
  long kept = 0;
  for (long c : sw.window_counts) kept += c;
  REQUIRE(sw.total_pairs == kept + sw.dropped_pairs + sw.excluded_pairs);

  // univariate mode produces d = 1 from the same series
  const WindowizeReport uni = windowize(series, spec, CgmMode::Univariate);
  REQUIRE(uni.subjects[0].dataset.dimension() == 1);
  // same number of usable pairs in both modes
  long kept_uni = 0;
  for (long c : uni.subjects[0].window_counts) kept_uni += c;
  REQUIRE(kept_uni == kept);
}

TEST_CASE("windowize: minimum-count windows are excluded, short subjects too",
          "[ingest]") {
  WindowSpec spec;
  spec.window_minutes = 60.0;
  spec.sampling_interval = 5.0;
  spec.max_gap_multiplier = 3.0;
  spec.min_count = 5;

  // window 1: dense (12 pairs); window 2: 3 readings only (1 dropped pair +
  // 2 kept pairs below the count threshold); window 3: dense again
  std::vector<std::string> rows;
  auto add = [&rows](double t, double g) {
    std::ostringstream os;
    os << "s1,a," << t << ',' << g;
    rows.push_back(os.str());
  };
  for (double t = 0.0; t <= 60.0; t += 5.0) add(t, 100.0 + t);
  add(100.0, 90.0);
  add(105.0, 91.0);
  add(110.0, 92.0);
  for (double t = 125.0; t <= 180.0; t += 5.0) add(t, 110.0);
  // a second subject with a single reading cannot form any pair
  rows.push_back("s2,a,0,100");

  const WindowizeReport report =
      windowize(parse_cgm_csv_text(rows_csv(rows)), spec, CgmMode::Univariate);

  REQUIRE(report.subjects.size() == 1);
  const SubjectWindows& sw = report.subjects[0];
  REQUIRE(sw.window_counts == std::vector<long>{12, 12});
  REQUIRE(sw.dropped_pairs == 1);   // the 110 -> 125 jump is fine; 40-gap is not
  REQUIRE(sw.excluded_pairs == 2);  // window 2 stays under the minimum
  REQUIRE(sw.total_pairs == 12 + 12 + 1 + 2);
  REQUIRE(sw.dataset.grid.points == std::vector<double>({0.0, 1.0}));

  REQUIRE(report.excluded.size() == 1);
  REQUIRE(report.excluded[0].id == "s2");
  REQUIRE(report.excluded[0].dataset.snapshots.empty());
}

TEST_CASE("windowize: a subject with one usable window is excluded",
          "[ingest]") {
  WindowSpec spec;
  spec.window_minutes = 60.0;
  spec.min_count = 5;

  std::vector<std::string> rows;
  for (double t = 0.0; t <= 60.0; t += 5.0) {
    std::ostringstream os;
    os << "solo,a," << t << ",100";
    rows.push_back(os.str());
  }
  const WindowizeReport report =
      windowize(parse_cgm_csv_text(rows_csv(rows)), spec, CgmMode::Univariate);
  REQUIRE(report.subjects.empty());
  REQUIRE(report.excluded.size() == 1);
  // its pairs count as excluded, keeping the conservation identity
  REQUIRE(report.excluded[0].excluded_pairs == 12);

  const json manifest = cohort_manifest(report);
  REQUIRE(manifest.at("subjects").size() == 1);
  REQUIRE(manifest.at("subjects")[0].at("id") == "solo");
  REQUIRE(manifest.at("subjects")[0].at("windows") == 0);
}

TEST_CASE("windowize: bivariate snapshots carry (G, V) pairs", "[ingest]") {
  WindowSpec spec;
  spec.window_minutes = 60.0;
  spec.min_count = 3;

  std::vector<std::string> rows;
  for (double t = 0.0; t <= 120.0; t += 5.0) {
    std::ostringstream os;
    os << "s1,a," << t << ',' << 100.0 + 0.5 * t;
    rows.push_back(os.str());
  }
  const WindowizeReport report =
      windowize(parse_cgm_csv_text(rows_csv(rows)), spec, CgmMode::Bivariate);
  const SubjectWindows& sw = report.subjects[0];
  // first pair of the first window: G at t=5 and slope (102.5-100)/5 = 0.5
  REQUIRE(sw.dataset.snapshots[0](0, 0) == Approx(102.5).margin(1e-12));
  REQUIRE(sw.dataset.snapshots[0](0, 1) == Approx(0.5).margin(1e-12));
}

TEST_CASE("cohort_manifest lists kept subjects with their window counts",
          "[ingest]") {
  const double week = 7.0 * 24.0 * 60.0;
  const std::string text = std::string(kHeader) +
                           dense_subject("a1", "treated", 0.0, 3.0 * week) +
                           dense_subject("b2", "control", 0.0, 2.0 * week);
  WindowSpec spec;
  const WindowizeReport report =
      windowize(parse_cgm_csv_text(text), spec, CgmMode::Bivariate);
  const json manifest = cohort_manifest(report);
  REQUIRE(manifest.at("subjects").size() == 2);
  REQUIRE(manifest.at("subjects")[0].at("id") == "a1");
  REQUIRE(manifest.at("subjects")[0].at("arm") == "treated");
  REQUIRE(manifest.at("subjects")[0].at("windows") == 3);
  REQUIRE(manifest.at("subjects")[1].at("id") == "b2");
  REQUIRE(manifest.at("subjects")[1].at("windows") == 2);
}

TEST_CASE("fit_cohort shares one dictionary and refits only weights",
          "[ingest]") {
  const double week = 7.0 * 24.0 * 60.0;
  const std::string text = std::string(kHeader) +
                           dense_subject("a1", "treated", 0.0, 2.0 * week, 95.0) +
                           dense_subject("b2", "control", 0.0, 2.0 * week, 115.0);
  WindowSpec spec;
  const WindowizeReport report =
      windowize(parse_cgm_csv_text(text), spec, CgmMode::Univariate);
  REQUIRE(report.subjects.size() == 2);

  FitConfig cfg;
  cfg.k = 2;
  cfg.outer_iterations = 2;
  cfg.inner_steps = 3;
  cfg.seed = 13;
  const CohortFit cohort = fit_cohort(report, cfg, false);

  REQUIRE(cohort.subject_ids == std::vector<std::string>{"a1", "b2"});
  REQUIRE(cohort.subject_arms == std::vector<std::string>{"treated", "control"});
  REQUIRE(cohort.subject_models.size() == 2);

  for (const FittedModel& m : cohort.subject_models) {
    // frozen dictionary: bitwise identical to the cohort dictionary
    for (std::size_t s = 0; s < 2; ++s) {
      REQUIRE(m.dictionary.components[s].mean ==
              cohort.dictionary.components[s].mean);
      REQUIRE(m.dictionary.components[s].cholesky ==
              cohort.dictionary.components[s].cholesky);
    }
    REQUIRE(m.weightTable.rows.size() == 2);
    for (const auto& row : m.weightTable.rows) {
      REQUIRE(row.weights.minCoeff() >= 0.0);
      REQUIRE(row.weights.sum() == Approx(1.0).margin(1e-9));
    }
  }

  // per-window bandwidths come from each subject's own snapshots
  for (std::size_t i = 0; i < 2; ++i) {
    const SubjectWindows& sw = report.subjects[i];
    for (std::size_t w = 0; w < 2; ++w)
      REQUIRE(cohort.subject_models[i].kernelBandwidths[w] ==
              median_heuristic(sw.dataset.snapshots[w]));
  }

  // determinism and the pooled-sample toggle
  const CohortFit again = fit_cohort(report, cfg, false);
  REQUIRE(serialize_model(again.subject_models[0]) ==
          serialize_model(cohort.subject_models[0]));
  const CohortFit pooled_all = fit_cohort(report, cfg, true);
  REQUIRE(pooled_all.subject_models.size() == 2);

  WindowizeReport empty;
  REQUIRE_THROWS_AS(fit_cohort(empty, cfg, false), InputError);
}

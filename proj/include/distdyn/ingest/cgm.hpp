#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "distdyn/core/json_io.hpp"
#include "distdyn/core/types.hpp"

namespace distdyn {

struct CgmSeries {
  std::string subject_id;
  std::string arm;
  std::vector<double> timestamps;  // minutes
  std::vector<double> glucose;     // mg/dL

  void validate() const {
    if (timestamps.size() != glucose.size())
      throw InputError("CgmSeries: timestamp/glucose length mismatch");
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
      if (!std::isfinite(glucose[i]) || glucose[i] <= 0.0)
        throw InputError("CgmSeries: glucose must be finite and > 0 (subject " +
                         subject_id + ")");
      if (i > 0 && timestamps[i] <= timestamps[i - 1])
        throw InputError("CgmSeries: timestamps must strictly increase (subject " +
                         subject_id + ")");
    }
  }
};

struct WindowSpec {
  double window_minutes = 7.0 * 24.0 * 60.0;  // 7 days
  double sampling_interval = 5.0;             // minutes
  double max_gap_multiplier = 3.0;
  int min_count = 50;

  void validate() const {
    if (!(window_minutes > 0.0) || !(sampling_interval > 0.0) ||
        !(max_gap_multiplier > 0.0) || min_count < 1)
      throw InputError("WindowSpec: lengths must be positive");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string trim_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Parse a cohort CSV with exact header subject_id,arm,timestamp_minutes,
// glucose_mgdl. Rows are grouped by subject in order of first appearance;
// each subject's rows must appear in strictly increasing timestamp order.
inline std::vector<CgmSeries> parse_cgm_csv_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line))
    throw ParseError("cgm csv: empty file");
  {
    std::vector<std::string> header = detail::split_csv_line(line);
    for (std::string& h : header) h = detail::trim_ws(h);
    const std::vector<std::string> expected = {"subject_id", "arm",
                                               "timestamp_minutes",
                                               "glucose_mgdl"};
    if (header != std::vector<std::string>(expected))
      throw ParseError(
          "cgm csv: header must be exactly "
          "subject_id,arm,timestamp_minutes,glucose_mgdl");
  }

  std::vector<CgmSeries> series;
  std::map<std::string, std::size_t> index_of;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim_ws(line).empty()) continue;
    std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != 4)
      throw ParseError("cgm csv: line " + std::to_string(line_no) +
                       ": expected 4 fields");
    const std::string id = detail::trim_ws(f[0]);
    const std::string arm = detail::trim_ws(f[1]);
    double ts, g;
    try {
      ts = std::stod(f[2]);
      g = std::stod(f[3]);
    } catch (const std::exception&) {
      throw ParseError("cgm csv: line " + std::to_string(line_no) +
                       ": non-numeric timestamp or glucose");
    }
    if (!std::isfinite(g) || g <= 0.0)
      throw ParseError("cgm csv: line " + std::to_string(line_no) +
                       ": glucose must be finite and > 0");

    auto it = index_of.find(id);
    if (it == index_of.end()) {
      index_of[id] = series.size();
      series.push_back(CgmSeries{id, arm, {ts}, {g}});
    } else {
      CgmSeries& s = series[it->second];
      if (s.arm != arm)
        throw ParseError("cgm csv: line " + std::to_string(line_no) +
                         ": subject " + id + " has conflicting arm labels");
      if (ts == s.timestamps.back())
        throw ParseError("cgm csv: line " + std::to_string(line_no) +
                         ": duplicate timestamp for subject " + id);
      if (ts < s.timestamps.back())
        throw ParseError("cgm csv: line " + std::to_string(line_no) +
                         ": non-monotone timestamp for subject " + id);
      s.timestamps.push_back(ts);
      s.glucose.push_back(g);
    }
  }
  for (const CgmSeries& s : series) s.validate();
  return series;
}

inline std::vector<CgmSeries> parse_cgm_csv(const std::string& path) {
  return parse_cgm_csv_text(read_text_file(path));
}

inline std::string cgm_series_to_csv(const std::vector<CgmSeries>& series) {
  std::ostringstream os;
  os.precision(12);
  os << "subject_id,arm,timestamp_minutes,glucose_mgdl\n";
  for (const CgmSeries& s : series)
    for (std::size_t i = 0; i < s.timestamps.size(); ++i)
      os << s.subject_id << ',' << s.arm << ',' << s.timestamps[i] << ','
         << s.glucose[i] << '\n';
  return os.str();
}

// Finite-difference rate of change V_l = (G_l - G_{l-1}) / (u_l - u_{l-1}),
// attached to the right endpoint, kept only when the gap is at most
// max-gap-multiplier * sampling interval.
struct RatePairs {
  std::vector<double> times;  // right-endpoint timestamps (minutes)
  Matrix pairs;               // n x 2 columns (G, V)
  long dropped = 0;
};

inline RatePairs rate_of_change(const CgmSeries& series, const WindowSpec& spec) {
  series.validate();
  spec.validate();
  if (series.timestamps.size() < 2)
    throw InputError("rate_of_change: series length >= 2 required");
  const double max_gap = spec.max_gap_multiplier * spec.sampling_interval;
  std::vector<double> times;
  std::vector<double> g, v;
  long dropped = 0;
  for (std::size_t i = 1; i < series.timestamps.size(); ++i) {
    const double gap = series.timestamps[i] - series.timestamps[i - 1];
    if (gap > max_gap + 1e-9) {
      ++dropped;
      continue;
    }
    times.push_back(series.timestamps[i]);
    g.push_back(series.glucose[i]);
    v.push_back((series.glucose[i] - series.glucose[i - 1]) / gap);
  }
  RatePairs out;
  out.times = std::move(times);
  out.pairs = Matrix(static_cast<Eigen::Index>(g.size()), 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.pairs(static_cast<Eigen::Index>(i), 0) = g[i];
    out.pairs(static_cast<Eigen::Index>(i), 1) = v[i];
  }
  out.dropped = dropped;
  return out;
}

enum class CgmMode { Univariate, Bivariate };

inline CgmMode cgm_mode_from_name(const std::string& name) {
  if (name == "univariate") return CgmMode::Univariate;
  if (name == "bivariate") return CgmMode::Bivariate;
  throw InputError("unknown ingest mode: " + name);
}

struct SubjectWindows {
  std::string id;
  std::string arm;
  SnapshotDataset dataset;          // windowed snapshots, normalized grid
  std::vector<long> window_counts;  // per kept window
  long dropped_pairs = 0;           // gap rule
  long excluded_pairs = 0;          // pairs in below-minimum windows
  long total_pairs = 0;             // consecutive-reading pairs attempted
};

struct WindowizeReport {
  std::vector<SubjectWindows> subjects;
  // Subjects excluded for having fewer than two usable windows; their
  // dataset member is empty.
  std::vector<SubjectWindows> excluded;
};

// Assign rate pairs to consecutive windows (t-1, t] of the given length
// starting at each subject's first reading; keep windows meeting the
// minimum count; normalize kept-window midpoints onto [0, 1].
inline WindowizeReport windowize(const std::vector<CgmSeries>& series,
                                 const WindowSpec& spec, CgmMode mode) {
  spec.validate();
  WindowizeReport report;
  for (const CgmSeries& s : series) {
    if (s.timestamps.size() < 2) {
      SubjectWindows sw;
      sw.id = s.subject_id;
      sw.arm = s.arm;
      report.excluded.push_back(std::move(sw));
      continue;
    }
    RatePairs rp = rate_of_change(s, spec);
    const double start = s.timestamps.front();
    const double L = spec.window_minutes;

    std::map<long, std::vector<Eigen::Index>> members;
    for (std::size_t i = 0; i < rp.times.size(); ++i) {
      long w = static_cast<long>(std::ceil((rp.times[i] - start) / L));
      if (w < 1) w = 1;
      members[w].push_back(static_cast<Eigen::Index>(i));
    }

    SubjectWindows sw;
    sw.id = s.subject_id;
    sw.arm = s.arm;
    sw.dropped_pairs = rp.dropped;
    sw.total_pairs = static_cast<long>(s.timestamps.size()) - 1;

    std::vector<long> kept_windows;
    for (const auto& [w, rows] : members) {
      if (static_cast<int>(rows.size()) >= spec.min_count)
        kept_windows.push_back(w);
      else
        sw.excluded_pairs += static_cast<long>(rows.size());
    }
    if (kept_windows.size() < 2) {
      for (long w : kept_windows)
        sw.excluded_pairs += static_cast<long>(members[w].size());
      sw.dataset = SnapshotDataset{};
      report.excluded.push_back(std::move(sw));
      continue;
    }

    const double mid_first = start + (static_cast<double>(kept_windows.front()) - 0.5) * L;
    const double mid_last = start + (static_cast<double>(kept_windows.back()) - 0.5) * L;
    sw.dataset.grid.horizon = 1.0;
    for (long w : kept_windows) {
      const double mid = start + (static_cast<double>(w) - 0.5) * L;
      sw.dataset.grid.points.push_back((mid - mid_first) / (mid_last - mid_first));
      const std::vector<Eigen::Index>& rows = members[w];
      sw.window_counts.push_back(static_cast<long>(rows.size()));
      const Eigen::Index d = (mode == CgmMode::Bivariate) ? 2 : 1;
      Matrix snap(static_cast<Eigen::Index>(rows.size()), d);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        snap(static_cast<Eigen::Index>(i), 0) = rp.pairs(rows[i], 0);
        if (d == 2) snap(static_cast<Eigen::Index>(i), 1) = rp.pairs(rows[i], 1);
      }
      sw.dataset.snapshots.push_back(std::move(snap));
    }
    sw.dataset.validate();
    report.subjects.push_back(std::move(sw));
  }
  return report;
}

// Cohort manifest: {subjects:[{id, arm, windows, dropped_pairs}]}.
inline json cohort_manifest(const WindowizeReport& report) {
  json subjects = json::array();
  for (const SubjectWindows& s : report.subjects)
    subjects.push_back({{"id", s.id},
                        {"arm", s.arm},
                        {"windows", s.window_counts.size()},
                        {"dropped_pairs", s.dropped_pairs}});
  for (const SubjectWindows& s : report.excluded)
    subjects.push_back({{"id", s.id},
                        {"arm", s.arm},
                        {"windows", 0},
                        {"dropped_pairs", s.dropped_pairs}});
  return json{{"subjects", subjects}};
}

}  // namespace distdyn

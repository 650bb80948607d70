#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/version.hpp"

namespace knobtune {

// Shortest decimal representation that round-trips the exact double, so
// traces are byte-stable across runs of the same build.
inline std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error("cannot parse number: " + s);
  return v;
}

struct StepRecord {
  std::size_t step = 0;  // 1-based evaluation index
  std::vector<double> action_raw;
  Configuration config;
  MetricsSnapshot snapshot;
  StateVector state;
  double reward = 0.0;
  double objective = 0.0;
  double best_objective = 0.0;
  Configuration best_config;
  double downtime_s = 0.0;
  double action_time_s = 0.0;
  double update_time_s = 0.0;
};

struct TuningTrace {
  std::string method;         // "ddpg" or "baseline"
  std::string env_selection;  // e.g. "sim:seq_write"
  std::uint64_t seed = 0;
  std::string code_version = kVersion;
  std::vector<std::string> param_names;
  std::vector<std::string> metric_names;
  std::map<std::string, double> objective_weights;
  std::map<std::string, double> hyper;  // agent settings; empty for the baseline
  Configuration default_config;
  double default_objective = 0.0;
  Configuration recommended;
  double recommended_objective = -std::numeric_limits<double>::infinity();
  std::vector<StepRecord> steps;

  double total_downtime_s() const {
    double sum = 0.0;
    for (const auto& r : steps) sum += r.downtime_s;
    return sum;
  }

  double total_measurement_s(double window_s) const {
    return window_s * static_cast<double>(steps.size());
  }

  void check() const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& r = steps[i];
      if (r.best_objective + 1e-12 < best)
        throw ValidationError("best-so-far decreased at step " + std::to_string(r.step));
      best = std::max(best, r.best_objective);
      if (r.action_raw.size() != param_names.size() || r.config.size() != param_names.size() ||
          r.state.size() != metric_names.size())
        throw ShapeError("trace record " + std::to_string(i) + " has inconsistent widths");
    }
  }
};

inline std::string trace_csv_header(const TuningTrace& trace) {
  std::string h = "step";
  for (const auto& p : trace.param_names) h += ",action_raw_" + p;
  for (const auto& p : trace.param_names) h += ",config_" + p;
  for (const auto& m : trace.metric_names) h += ",metric_" + m;
  for (const auto& m : trace.metric_names) h += ",state_" + m;
  h += ",reward,objective,best_objective,downtime_s,action_time_s,update_time_s";
  return h;
}

inline void write_trace_csv(const TuningTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << trace_csv_header(trace) << "\n";
  for (const auto& r : trace.steps) {
    out << r.step;
    for (double a : r.action_raw) out << "," << format_double(a);
    for (double v : r.config.values) out << "," << format_double(v);
    for (const auto& m : trace.metric_names) out << "," << format_double(r.snapshot.values.at(m));
    for (double s : r.state) out << "," << format_double(s);
    out << "," << format_double(r.reward) << "," << format_double(r.objective) << ","
        << format_double(r.best_objective) << "," << format_double(r.downtime_s) << ","
        << format_double(r.action_time_s) << "," << format_double(r.update_time_s) << "\n";
  }
  if (!out) throw Error("failed while writing " + path);
}

inline void write_trace_meta(const TuningTrace& trace, const std::string& path,
                             double measurement_window_s) {
  nlohmann::json j;
  j["method"] = trace.method;
  j["env"] = trace.env_selection;
  j["seed"] = trace.seed;
  j["code_version"] = trace.code_version;
  j["steps"] = trace.steps.size();
  j["param_names"] = trace.param_names;
  j["metric_names"] = trace.metric_names;
  j["objective_weights"] = trace.objective_weights;
  if (!trace.hyper.empty()) j["hyper"] = trace.hyper;
  j["default_config"] = trace.default_config.values;
  j["default_objective"] = trace.default_objective;
  j["recommended_config"] = trace.recommended.values;
  j["recommended_objective"] = trace.recommended_objective;
  j["total_downtime_s"] = trace.total_downtime_s();
  j["total_measurement_s"] = trace.total_measurement_s(measurement_window_s);
  j["total_simulated_cost_s"] =
      trace.total_downtime_s() + trace.total_measurement_s(measurement_window_s);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// A trace read back for reporting: raw columns plus the sidecar metadata.
struct LoadedTrace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json meta;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw ValidationError("trace has no column " + name);
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline LoadedTrace load_trace_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open " + csv_path);
  LoadedTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw Error(csv_path + " is empty");
  trace.columns = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != trace.columns.size())
      throw Error(csv_path + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(trace.columns.size()));
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = parse_double(fields[i]);
    trace.rows.push_back(std::move(row));
  }

  std::string meta_path = csv_path;
  auto dot = meta_path.rfind(".csv");
  if (dot != std::string::npos) meta_path = meta_path.substr(0, dot);
  meta_path += ".meta.json";
  std::ifstream meta_in(meta_path);
  if (meta_in) trace.meta = nlohmann::json::parse(meta_in);
  return trace;
}

}  // namespace knobtune

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "knobtune/errors.hpp"
#include "knobtune/trace.hpp"

namespace knobtune {

namespace report_detail {

inline std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                              ? c
                              : '_';
  return out;
}

struct SessionSummary {
  std::string method;
  std::string env;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  double default_objective = 0.0;
  double best_objective = 0.0;
  double total_downtime_s = 0.0;
  std::vector<double> step_axis;
  std::vector<double> best_curve;

  double gain_pct() const {
    return 100.0 * (best_objective - default_objective) / default_objective;
  }
};

inline SessionSummary summarize(const LoadedTrace& trace, const std::string& label) {
  if (trace.meta.is_null())
    throw ValidationError(label + " has no sidecar metadata (.meta.json)");
  SessionSummary s;
  s.method = trace.meta.at("method").get<std::string>();
  s.env = trace.meta.at("env").get<std::string>();
  s.seed = trace.meta.at("seed").get<std::uint64_t>();
  s.steps = trace.rows.size();
  s.default_objective = trace.meta.at("default_objective").get<double>();
  s.best_objective = trace.meta.at("recommended_objective").get<double>();
  s.total_downtime_s = trace.meta.value("total_downtime_s", 0.0);
  std::size_t step_col = trace.column("step");
  std::size_t best_col = trace.column("best_objective");
  for (const auto& row : trace.rows) {
    s.step_axis.push_back(row[step_col]);
    s.best_curve.push_back(row[best_col]);
  }
  return s;
}

struct Series {
  std::string label;
  std::vector<double> x, y;
};

// Minimal line chart, one polyline per series, optional horizontal
// reference line for the oracle value.
inline void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                            const std::vector<Series>& series, std::optional<double> reference) {
  const double width = 760, height = 460;
  const double ml = 64, mr = 180, mt = 44, mb = 48;
  const double pw = width - ml - mr, ph = height - mt - mb;
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (reference) {
    y0 = std::min(y0, *reference);
    y1 = std::max(y1, *reference);
  }
  if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
  double pad = std::max(0.05 * (y1 - y0), 1e-3);
  y0 -= pad;
  y1 += pad;

  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";

  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double fx = x0 + (x1 - x0) * t / 4.0;
    double fy = y0 + (y1 - y0) * t / 4.0;
    out << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx) << "\" y2=\""
        << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 20
        << "\" text-anchor=\"middle\">" << fmt(fx, "%.3g") << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
        << py(fy) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\">" << fmt(fy, "%.3g") << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\">step</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">best objective</text>\n";

  if (reference) {
    out << "<line x1=\"" << ml << "\" y1=\"" << py(*reference) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << py(*reference)
        << "\" stroke=\"#444\" stroke-dasharray=\"6 4\"/>\n";
    out << "<text x=\"" << ml + pw - 4 << "\" y=\"" << py(*reference) - 5
        << "\" text-anchor=\"end\" fill=\"#444\">oracle " << fmt(*reference) << "</text>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % (sizeof palette / sizeof *palette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (i) out << " ";
      out << fmt(px(series[s].x[i]), "%.2f") << "," << fmt(py(series[s].y[i]), "%.2f");
    }
    out << "\"/>\n";
    double ly = mt + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4 << "\">" << series[s].label
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace report_detail

struct ReportBundle {
  std::filesystem::path summary_csv;
  std::filesystem::path comparison_md;
  std::vector<std::filesystem::path> charts;
};

// Offline report over finished traces: per-session summary CSV, a
// markdown table of gain vs default per method/environment, and one SVG
// best-so-far chart per environment. Oracle values (per environment
// selection string) appear as reference lines and table columns.
inline ReportBundle write_report(const std::vector<LoadedTrace>& traces,
                                 const std::map<std::string, double>& oracle,
                                 const std::filesystem::path& out_dir) {
  using namespace report_detail;
  if (traces.empty()) throw ValidationError("report needs at least one trace");
  for (const auto& t : traces)
    if (t.columns != traces.front().columns)
      throw ValidationError("traces have mixed schemas; report them separately");

  std::vector<SessionSummary> sessions;
  for (std::size_t i = 0; i < traces.size(); ++i)
    sessions.push_back(summarize(traces[i], "trace " + std::to_string(i)));

  std::filesystem::create_directories(out_dir);
  ReportBundle bundle;

  bundle.summary_csv = out_dir / "summary.csv";
  {
    std::ofstream out(bundle.summary_csv);
    if (!out) throw Error("cannot write " + bundle.summary_csv.string());
    out << "method,env,seed,steps,default_objective,best_objective,gain_pct,total_downtime_s\n";
    for (const auto& s : sessions) {
      out << s.method << "," << s.env << "," << s.seed << "," << s.steps << ","
          << format_double(s.default_objective) << "," << format_double(s.best_objective) << ","
          << format_double(s.gain_pct()) << "," << format_double(s.total_downtime_s) << "\n";
    }
  }

  std::map<std::pair<std::string, std::string>, std::vector<const SessionSummary*>> groups;
  for (const auto& s : sessions) groups[{s.env, s.method}].push_back(&s);

  bundle.comparison_md = out_dir / "comparison.md";
  {
    std::ofstream out(bundle.comparison_md);
    if (!out) throw Error("cannot write " + bundle.comparison_md.string());
    out << "# Tuning results\n\n";
    out << "Gain is 100 * (best - default) / default of the scalarized objective.\n\n";
    bool have_oracle = !oracle.empty();
    out << "| environment | method | sessions | default | median best | median gain % |";
    if (have_oracle) out << " oracle | best/oracle |";
    out << "\n|---|---|---|---|---|---|";
    if (have_oracle) out << "---|---|";
    out << "\n";
    for (const auto& [key, members] : groups) {
      std::vector<double> bests, gains, defaults;
      for (const auto* s : members) {
        bests.push_back(s->best_objective);
        gains.push_back(s->gain_pct());
        defaults.push_back(s->default_objective);
      }
      out << "| " << key.first << " | " << key.second << " | " << members.size() << " | "
          << fmt(median(defaults)) << " | " << fmt(median(bests)) << " | " << fmt(median(gains))
          << " |";
      if (have_oracle) {
        auto it = oracle.find(key.first);
        if (it != oracle.end())
          out << " " << fmt(it->second) << " | " << fmt(median(bests) / it->second) << " |";
        else
          out << " | |";
      }
      out << "\n";
    }
  }

  std::map<std::string, std::vector<Series>> by_env;
  for (const auto& s : sessions) {
    Series series;
    series.label = s.method + " seed " + std::to_string(s.seed);
    series.x = s.step_axis;
    series.y = s.best_curve;
    by_env[s.env].push_back(std::move(series));
  }
  for (const auto& [env, series] : by_env) {
    auto path = out_dir / ("chart_" + sanitize(env) + ".svg");
    std::optional<double> ref;
    auto it = oracle.find(env);
    if (it != oracle.end()) ref = it->second;
    write_svg_chart(path, "best-so-far objective: " + env, series, ref);
    bundle.charts.push_back(path);
  }
  return bundle;
}

}  // namespace knobtune

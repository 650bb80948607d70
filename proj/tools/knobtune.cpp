// Command-line runner: tuning and baseline sessions, configuration
// evaluation, grid-oracle optima, and offline reports over trace files.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "knobtune/knobtune.hpp"

namespace fs = std::filesystem;
using namespace knobtune;

namespace {

struct CommonFlags {
  std::string env;
  std::string config_file;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string checkpoint_dir;
  bool resume = false;
  std::optional<std::size_t> repeats;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--env", f.env, "Environment: sim:<profile[.json]> or external:<url>");
  cmd->add_option("--config", f.config_file, "Session file (JSON)");
  cmd->add_option("--steps", f.steps, "Evaluation budget (total, including resumed steps)");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--checkpoint", f.checkpoint_dir, "Checkpoint directory");
  cmd->add_flag("--resume", f.resume, "Resume from the checkpoint in the checkpoint directory");
  cmd->add_option("--repeats", f.repeats, "Measurements per evaluation");
}

SessionConfig assemble_session(const CommonFlags& f) {
  SessionConfig s;
  if (!f.config_file.empty()) s = load_session_file(f.config_file);
  if (!f.env.empty()) s.env_selection = f.env;
  if (f.steps) s.steps = *f.steps;
  if (f.seed) s.seed = *f.seed;
  if (!f.out_dir.empty()) s.out_dir = f.out_dir;
  if (!f.checkpoint_dir.empty()) s.checkpoint_dir = f.checkpoint_dir;
  if (f.resume) s.resume = true;
  if (f.repeats) s.repeats = *f.repeats;
  s.check();
  return s;
}

std::string config_to_text(const ParameterSpace& space, const Configuration& config) {
  std::string out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i) out += " ";
    out += space.param(i).name + "=" + format_double(config.values[i]);
  }
  return out;
}

fs::path trace_basename(const SessionConfig& s, const std::string& method) {
  return fs::path(s.out_dir) /
         (method + "_" + report_detail::sanitize(s.env_selection) + "_seed" +
          std::to_string(s.seed));
}

void write_trace_files(const TuningTrace& trace, const fs::path& base, double window_s) {
  fs::create_directories(base.parent_path());
  write_trace_csv(trace, base.string() + ".csv");
  write_trace_meta(trace, base.string() + ".meta.json", window_s);
  std::cout << "trace: " << base.string() << ".csv\n";
}

double lookup_window(const SessionConfig& s) {
  return make_env(s)->descriptor().measurement_window_s;
}

// Evaluate and print gain vs default for a finished session.
void print_outcome(const TuningTrace& trace, const ParameterSpace& space) {
  std::cout << "recommended: " << config_to_text(space, trace.recommended) << "\n";
  std::cout << "objective: " << format_double(trace.recommended_objective) << " (default "
            << format_double(trace.default_objective);
  if (trace.default_objective > 0.0) {
    double gain = 100.0 * (trace.recommended_objective - trace.default_objective) /
                  trace.default_objective;
    std::cout << ", gain " << report_detail::fmt(gain) << "%";
  }
  std::cout << ")\n";
  std::cout << "total downtime: " << format_double(trace.total_downtime_s()) << " s over "
            << trace.steps.size() << " steps\n";
}

// Resumed sessions append the first new step so the earlier trace survives.
fs::path with_resume_suffix(fs::path base, const SessionConfig& session, const TuningTrace& trace) {
  if (session.resume && !trace.steps.empty())
    base += "_from" + std::to_string(trace.steps.front().step);
  return base;
}

int cmd_tune(const CommonFlags& flags) {
  SessionConfig session = assemble_session(flags);
  TuningTrace trace;
  fs::path base = trace_basename(session, "tune");
  try {
    TuneResult result = run_tuning(session, trace);
    write_trace_files(trace, with_resume_suffix(base, session, trace), result.measurement_window_s);
    ParameterSpace space = make_env(session)->descriptor().space;
    print_outcome(trace, space);
    std::cout << "checkpoint: " << result.checkpoint_file.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    if (!trace.steps.empty())
      write_trace_files(trace, with_resume_suffix(base, session, trace), lookup_window(session));
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_baseline(const CommonFlags& flags) {
  SessionConfig session = assemble_session(flags);
  if (flags.steps) session.baseline.budget = *flags.steps;
  TuningTrace trace;
  trace.env_selection = session.env_selection;
  trace.seed = session.seed;
  fs::path base = trace_basename(session, "baseline");
  auto env = make_env(session);
  Rng rng = make_rng(session.seed, /*stream=*/0xBA);
  try {
    run_baseline(*env, session.objective, session.baseline, rng, trace);
    write_trace_files(trace, base, env->descriptor().measurement_window_s);
    print_outcome(trace, env->descriptor().space);
    return 0;
  } catch (const std::exception& e) {
    if (!trace.steps.empty())
      write_trace_files(trace, base, env->descriptor().measurement_window_s);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_evaluate(const CommonFlags& flags, const std::vector<std::string>& sets) {
  SessionConfig session = assemble_session(flags);
  auto env = make_env(session);
  const auto& desc = env->descriptor();

  Configuration config = desc.default_config;
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--set expects name=value, got " + kv);
    config.values[desc.space.index_of(kv.substr(0, eq))] = parse_double(kv.substr(eq + 1));
  }
  desc.space.require_valid(config);

  EvalStats stats = evaluate(*env, session.objective, config, session.repeats);
  std::cout << "config: " << config_to_text(desc.space, config) << "\n";
  std::cout << "objective mean: " << format_double(stats.mean) << "\n";
  std::cout << "objective stddev: " << format_double(stats.stddev) << " over " << session.repeats
            << " repeats\n";
  return 0;
}

int cmd_grid_oracle(const CommonFlags& flags, std::size_t resolution) {
  SessionConfig session = assemble_session(flags);
  auto env = make_env(session);
  GridOracleResult result = run_grid_oracle(*env, session.objective, resolution);

  std::cout << "optimum: " << config_to_text(env->descriptor().space, result.optimum) << "\n";
  std::cout << "value: " << format_double(result.value) << "\n";
  std::cout << "grid:";
  for (std::size_t i = 0; i < result.axis_sizes.size(); ++i)
    std::cout << (i ? " x " : " ") << result.axis_sizes[i];
  std::cout << " (" << result.grid_points << " feasible points)\n";

  if (!flags.out_dir.empty()) {
    nlohmann::json j;
    j["env"] = session.env_selection;
    j["objective_weights"] = session.objective.weights;
    j["resolution"] = resolution;
    j["value"] = result.value;
    for (std::size_t i = 0; i < env->descriptor().space.size(); ++i)
      j["optimum"][env->descriptor().space.param(i).name] = result.optimum.values[i];
    fs::create_directories(flags.out_dir);
    fs::path path = fs::path(flags.out_dir) /
                    ("oracle_" + report_detail::sanitize(session.env_selection) + ".json");
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    std::cout << "written: " << path.string() << "\n";
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& trace_paths,
               const std::vector<std::string>& oracle_args, const std::string& out_dir) {
  std::vector<LoadedTrace> traces;
  for (const auto& p : trace_paths) traces.push_back(load_trace_csv(p));
  std::map<std::string, double> oracle;
  for (const auto& kv : oracle_args) {
    auto eq = kv.rfind('=');
    if (eq == std::string::npos)
      throw ValidationError("--oracle expects env=value, got " + kv);
    oracle[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1));
  }
  ReportBundle bundle = write_report(traces, oracle, out_dir);
  std::cout << "written: " << bundle.summary_csv.string() << "\n";
  std::cout << "written: " << bundle.comparison_md.string() << "\n";
  for (const auto& c : bundle.charts) std::cout << "written: " << c.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-tuner for restart-expensive system parameters"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonFlags tune_flags, baseline_flags, eval_flags, oracle_flags;
  std::vector<std::string> eval_sets;
  std::size_t oracle_resolution = 25;
  std::vector<std::string> report_traces, report_oracles;
  std::string report_out = "report";

  auto* tune = app.add_subcommand("tune", "Run a tuning session");
  add_common(tune, tune_flags);

  auto* baseline = app.add_subcommand("baseline", "Run the sampling-search baseline");
  add_common(baseline, baseline_flags);

  auto* eval = app.add_subcommand("evaluate", "Measure one configuration repeatedly");
  add_common(eval, eval_flags);
  eval->add_option("--set", eval_sets, "Parameter assignment name=value (repeatable)");

  auto* oracle = app.add_subcommand("grid-oracle", "Noise-free exhaustive grid optimum");
  add_common(oracle, oracle_flags);
  oracle->add_option("--resolution", oracle_resolution,
                     "Grid points per continuous parameter");

  auto* report = app.add_subcommand("report", "Summarize finished traces");
  report->add_option("traces", report_traces, "Trace CSV files")->required();
  report->add_option("--oracle", report_oracles, "Oracle value env=value (repeatable)");
  report->add_option("--out", report_out, "Report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tune->parsed()) return cmd_tune(tune_flags);
    if (baseline->parsed()) return cmd_baseline(baseline_flags);
    if (eval->parsed()) return cmd_evaluate(eval_flags, eval_sets);
    if (oracle->parsed()) return cmd_grid_oracle(oracle_flags, oracle_resolution);
    if (report->parsed()) return cmd_report(report_traces, report_oracles, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

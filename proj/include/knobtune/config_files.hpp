#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "knobtune/agent.hpp"
#include "knobtune/baseline.hpp"
#include "knobtune/env.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"

namespace knobtune {

// One tuning/baseline session, assembled from a session file and CLI flags.
struct SessionConfig {
  std::string env_selection = "sim:file_server";
  ObjectiveSpec objective{{{"throughput_mbps", 1.0}}};
  std::size_t steps = 30;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string checkpoint_dir;  // empty: keep checkpoints under out_dir
  bool resume = false;
  std::size_t repeats = 3;
  AgentHyper agent;
  BaselineSettings baseline;
  // Required for external environments, which cannot be introspected.
  std::optional<EnvDescriptor> external;

  void check() const {
    if (steps < 1) throw ValidationError("steps must be >= 1");
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
    agent.check();
  }
};

namespace config_detail {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline ParamKind parse_kind(const std::string& s) {
  if (s == "continuous") return ParamKind::Continuous;
  if (s == "discrete") return ParamKind::Discrete;
  throw ValidationError("unknown parameter kind: " + s);
}

inline ParamScale parse_scale(const std::string& s) {
  if (s == "linear") return ParamScale::Linear;
  if (s == "log") return ParamScale::Log;
  throw ValidationError("unknown parameter scale: " + s);
}

inline RestartKind parse_restart(const std::string& s) {
  if (s == "workload") return RestartKind::Workload;
  if (s == "dfs") return RestartKind::Dfs;
  throw ValidationError("unknown restart kind: " + s);
}

inline Comparator parse_comparator(const std::string& s) {
  if (s == "<") return Comparator::Less;
  if (s == "<=") return Comparator::LessEq;
  if (s == ">=") return Comparator::GreaterEq;
  if (s == ">") return Comparator::Greater;
  throw ValidationError("unknown comparator: " + s);
}

inline MetricScope parse_scope(const std::string& s) {
  if (s == "server") return MetricScope::Server;
  if (s == "client") return MetricScope::Client;
  throw ValidationError("unknown metric scope: " + s);
}

struct ParsedSpace {
  ParameterSpace space;
  std::vector<RestartKind> restart_kinds;
};

// "parameters": [{"name","kind","min","max","scale","restart"}], plus an
// optional "constraints": [{"param","op","bound"}].
inline ParsedSpace parse_space(const json& j) {
  std::vector<ParameterDef> defs;
  std::vector<RestartKind> restarts;
  for (const auto& p : j.at("parameters")) {
    ParameterDef def;
    def.name = p.at("name").get<std::string>();
    def.kind = parse_kind(p.value("kind", "continuous"));
    def.min_value = p.at("min").get<double>();
    def.max_value = p.at("max").get<double>();
    def.scale = parse_scale(p.value("scale", "linear"));
    defs.push_back(std::move(def));
    restarts.push_back(parse_restart(p.value("restart", "workload")));
  }
  std::vector<Constraint> constraints;
  if (j.contains("constraints")) {
    for (const auto& c : j.at("constraints")) {
      Constraint con;
      std::string pname = c.at("param").get<std::string>();
      std::size_t idx = defs.size();
      for (std::size_t i = 0; i < defs.size(); ++i)
        if (defs[i].name == pname) idx = i;
      if (idx == defs.size()) throw ValidationError("constraint on unknown parameter " + pname);
      con.param_index = idx;
      con.op = parse_comparator(c.at("op").get<std::string>());
      con.bound = c.at("bound").get<double>();
      constraints.push_back(con);
    }
  }
  return {ParameterSpace(std::move(defs), std::move(constraints)), std::move(restarts)};
}

// {"<param name>": value, ...} in any order.
inline Configuration parse_config(const json& j, const ParameterSpace& space) {
  std::vector<double> values(space.size());
  std::vector<bool> set(space.size(), false);
  for (const auto& [name, value] : j.items()) {
    std::size_t i = space.index_of(name);
    values[i] = value.get<double>();
    set[i] = true;
  }
  for (std::size_t i = 0; i < space.size(); ++i)
    if (!set[i]) throw ValidationError("configuration missing parameter " + space.param(i).name);
  return Configuration(std::move(values));
}

inline std::vector<double> parse_per_param(const json& j, const ParameterSpace& space,
                                           const std::string& what) {
  std::vector<double> values(space.size());
  std::vector<bool> set(space.size(), false);
  for (const auto& [name, value] : j.items()) {
    std::size_t i = space.index_of(name);
    values[i] = value.get<double>();
    set[i] = true;
  }
  for (std::size_t i = 0; i < space.size(); ++i)
    if (!set[i]) throw ValidationError(what + " missing parameter " + space.param(i).name);
  return values;
}

inline MetricDescriptor parse_metric(const json& j) {
  MetricDescriptor m;
  m.name = j.at("name").get<std::string>();
  m.unit = j.value("unit", "");
  m.scope = parse_scope(j.value("scope", "server"));
  if (j.contains("norm_min")) m.norm_min = j.at("norm_min").get<double>();
  if (j.contains("norm_max")) m.norm_max = j.at("norm_max").get<double>();
  return m;
}

}  // namespace config_detail

// Declarative response-surface file, so users can add workloads without
// recompiling. Schema documented in docs/formats.md.
inline SimProfile load_profile(const std::string& path) {
  using config_detail::json;
  json j = config_detail::load_json_file(path);

  SimProfile p;
  p.name = j.at("name").get<std::string>();
  auto parsed = config_detail::parse_space(j);
  p.space = std::move(parsed.space);
  p.restart_kinds = std::move(parsed.restart_kinds);
  p.default_config = config_detail::parse_config(j.at("default_config"), p.space);
  p.noise_frac = j.value("noise_frac", 0.05);

  for (const auto& ij : j.at("indicators")) {
    IndicatorSurface ind;
    ind.name = ij.at("name").get<std::string>();
    ind.unit = ij.value("unit", "");
    ind.scope = config_detail::parse_scope(ij.value("scope", "server"));
    ind.peak = ij.at("peak").get<double>();
    for (const auto& bj : ij.at("bumps")) {
      GaussianBump b;
      b.weight = bj.value("weight", 1.0);
      b.center_native = config_detail::parse_per_param(bj.at("center"), p.space, "bump center");
      b.width_unit = config_detail::parse_per_param(bj.at("width_unit"), p.space, "bump width");
      ind.bumps.push_back(std::move(b));
    }
    p.indicators.push_back(std::move(ind));
  }

  if (j.contains("aux_metrics")) {
    for (const auto& aj : j.at("aux_metrics")) {
      AuxMetric a;
      a.name = aj.at("name").get<std::string>();
      a.unit = aj.value("unit", "");
      a.scope = config_detail::parse_scope(aj.value("scope", "client"));
      a.norm_min = aj.at("norm_min").get<double>();
      a.norm_max = aj.at("norm_max").get<double>();
      a.base = aj.at("base").get<double>();
      a.inverse = aj.value("inverse", false);
      if (aj.contains("coeffs"))
        for (const auto& [ind_name, coeff] : aj.at("coeffs").items())
          a.coeffs[ind_name] = coeff.get<double>();
      a.noise_scale = aj.value("noise_scale", 0.0);
      p.aux_metrics.push_back(std::move(a));
    }
  }

  p.check();
  return p;
}

// Session file: everything a run needs beyond CLI flags. All keys optional
// except the external-environment block when env is external:<url>.
inline SessionConfig load_session_file(const std::string& path) {
  using config_detail::json;
  json j = config_detail::load_json_file(path);

  SessionConfig s;
  s.env_selection = j.value("env", s.env_selection);
  s.steps = j.value("steps", s.steps);
  s.seed = j.value("seed", s.seed);
  s.repeats = j.value("repeats", s.repeats);
  s.resume = j.value("resume", s.resume);
  s.out_dir = j.value("out_dir", s.out_dir);
  s.checkpoint_dir = j.value("checkpoint_dir", s.checkpoint_dir);

  if (j.contains("objective")) {
    s.objective.weights.clear();
    for (const auto& [name, w] : j.at("objective").items())
      s.objective.weights[name] = w.get<double>();
  }

  if (j.contains("agent")) {
    const auto& a = j.at("agent");
    s.agent.gamma = a.value("gamma", s.agent.gamma);
    s.agent.tau = a.value("tau", s.agent.tau);
    s.agent.batch_size = a.value("batch_size", s.agent.batch_size);
    s.agent.updates_per_step = a.value("updates_per_step", s.agent.updates_per_step);
    s.agent.warmup_steps = a.value("warmup_steps", s.agent.warmup_steps);
    s.agent.noise_sigma_start = a.value("noise_sigma_start", s.agent.noise_sigma_start);
    s.agent.noise_sigma_end = a.value("noise_sigma_end", s.agent.noise_sigma_end);
    s.agent.noise_decay_steps = a.value("noise_decay_steps", s.agent.noise_decay_steps);
    s.agent.actor_lr = a.value("actor_lr", s.agent.actor_lr);
    s.agent.critic_lr = a.value("critic_lr", s.agent.critic_lr);
    s.agent.replay_capacity = a.value("replay_capacity", s.agent.replay_capacity);
    if (a.contains("hidden")) s.agent.hidden = a.at("hidden").get<std::vector<std::size_t>>();
  }

  if (j.contains("baseline")) {
    const auto& b = j.at("baseline");
    s.baseline.budget = b.value("budget", s.baseline.budget);
    s.baseline.samples_per_round = b.value("samples_per_round", s.baseline.samples_per_round);
    s.baseline.shrink = b.value("shrink", s.baseline.shrink);
  }

  if (j.contains("external")) {
    const auto& e = j.at("external");
    EnvDescriptor d;
    auto parsed = config_detail::parse_space(e);
    d.space = std::move(parsed.space);
    d.restart_kinds = std::move(parsed.restart_kinds);
    std::vector<MetricDescriptor> metrics;
    for (const auto& mj : e.at("metrics")) metrics.push_back(config_detail::parse_metric(mj));
    d.schema = MetricSchema(std::move(metrics));
    d.default_config = config_detail::parse_config(e.at("default_config"), d.space);
    d.measurement_window_s = e.value("window_s", 120.0);
    s.external = std::move(d);
  }

  s.check();
  return s;
}

}  // namespace knobtune

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "knobtune/agent.hpp"
#include "knobtune/config_files.hpp"
#include "knobtune/env.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/external_env.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/trace.hpp"

namespace knobtune {

// sim:<builtin name>, sim:<profile.json>, or external:<url>. External
// environments need the descriptor block from the session file.
inline std::unique_ptr<Environment> make_env(const SessionConfig& session,
                                             std::uint64_t env_seed) {
  const std::string& sel = session.env_selection;
  if (sel.rfind("sim:", 0) == 0) {
    std::string rest = sel.substr(4);
    if (rest.empty()) throw ValidationError("sim: needs a profile name or file");
    bool is_file = rest.find('/') != std::string::npos || rest.find(".json") != std::string::npos;
    SimProfile profile = is_file ? load_profile(rest) : profiles::builtin(rest);
    return std::make_unique<SimEnv>(std::move(profile), env_seed);
  }
  if (sel.rfind("external:", 0) == 0) {
    if (!session.external)
      throw ValidationError("external environments need an \"external\" block in the session file");
    TsEndpoint endpoint = ts_endpoint_from_env(sel.substr(9));
    return std::make_unique<ExternalEnv>(*session.external, endpoint);
  }
  throw ValidationError("environment selection must be sim:<profile> or external:<url>: " + sel);
}

inline std::unique_ptr<Environment> make_env(const SessionConfig& session) {
  return make_env(session, session.seed);
}

namespace harness_detail {

inline double seconds_between(std::chrono::steady_clock::time_point a,
                              std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

inline std::map<std::string, double> hyper_as_map(const AgentHyper& h) {
  return {{"gamma", h.gamma},
          {"tau", h.tau},
          {"batch_size", static_cast<double>(h.batch_size)},
          {"updates_per_step", static_cast<double>(h.updates_per_step)},
          {"warmup_steps", static_cast<double>(h.warmup_steps)},
          {"noise_sigma_start", h.noise_sigma_start},
          {"noise_sigma_end", h.noise_sigma_end},
          {"noise_decay_steps", static_cast<double>(h.noise_decay_steps)},
          {"actor_lr", h.actor_lr},
          {"critic_lr", h.critic_lr},
          {"replay_capacity", static_cast<double>(h.replay_capacity)}};
}

}  // namespace harness_detail

struct TuneResult {
  Configuration recommended;
  double recommended_objective = 0.0;
  std::filesystem::path checkpoint_file;
  std::size_t start_step = 0;  // 0 for fresh sessions, checkpoint step when resumed
  double measurement_window_s = 0.0;
};

// The acting/learning loop. session.steps is the total evaluation budget;
// resuming continues from the checkpointed step toward the same total. The
// caller-owned trace keeps completed steps if the environment fails, and a
// checkpoint is written every 10 steps, at the end, and before propagating
// an environment error.
inline TuneResult run_tuning(const SessionConfig& session, TuningTrace& trace) {
  session.check();

  namespace fs = std::filesystem;
  fs::path ckpt_dir = session.checkpoint_dir.empty()
                          ? fs::path(session.out_dir) / "checkpoints"
                          : fs::path(session.checkpoint_dir);
  fs::create_directories(ckpt_dir);
  fs::path ckpt_file = ckpt_dir / "agent.ckpt";

  std::optional<Checkpoint> resumed;
  std::size_t start_step = 0;
  if (session.resume) {
    resumed = load_checkpoint(ckpt_file);
    start_step = resumed->agent.step_count();
  }

  // A fresh environment noise stream per (seed, resume point), so resumed
  // sessions do not replay the measurement noise of the completed steps.
  std::uint64_t env_seed =
      session.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(start_step));
  auto env = make_env(session, env_seed);
  const EnvDescriptor& desc = env->descriptor();
  const MetricSchema& schema = desc.schema;
  session.objective.check_against(schema);

  trace.method = "ddpg";
  trace.env_selection = session.env_selection;
  trace.seed = session.seed;
  trace.param_names.clear();
  for (const auto& p : desc.space.params()) trace.param_names.push_back(p.name);
  trace.metric_names = schema.names();
  trace.objective_weights = session.objective.weights;
  trace.hyper = harness_detail::hyper_as_map(session.agent);
  trace.default_config = desc.default_config;

  std::optional<DdpgAgent> agent;
  ReplayBuffer buffer(session.agent.replay_capacity);
  RunningBounds bounds;
  BestSeen best;
  StateVector state;
  double default_objective = 0.0;

  if (resumed) {
    if (resumed->agent.state_dim() != schema.size() ||
        resumed->agent.action_dim() != desc.space.size())
      throw CheckpointError("checkpoint dimensions do not match the environment");
    agent.emplace(std::move(resumed->agent));
    buffer = std::move(resumed->buffer);
    bounds = std::move(resumed->bounds);
    best = std::move(resumed->best);
    state = std::move(resumed->last_state);
    default_objective = resumed->default_objective;
    env->set_applied(resumed->last_config);
  } else {
    agent.emplace(schema.size(), desc.space.size(), session.agent, session.seed);
    auto initial = env->reset();
    state = normalize(initial.snapshot, schema, bounds);
    default_objective = scalarize(state, session.objective, schema);
    // Seed the replay with the default configuration's no-op transition so
    // the very first batches relate actions to the starting state.
    buffer.push({state, desc.space.unmap_config(desc.default_config), 0.0, state});
  }
  trace.default_objective = default_objective;

  Configuration applied = resumed ? resumed->last_config : desc.default_config;
  auto persist = [&] {
    save_checkpoint(ckpt_file, *agent, buffer, bounds, best, default_objective, state, applied);
  };

  for (std::size_t step = start_step + 1; step <= session.steps; ++step) {
    auto t0 = std::chrono::steady_clock::now();
    auto action = agent->act(state, /*explore=*/true);
    auto mapped = desc.space.map_action(action);
    EvaluationResult eval;
    try {
      eval = env->apply(mapped.config);
    } catch (...) {
      persist();
      throw;
    }
    auto t1 = std::chrono::steady_clock::now();

    StateVector next = normalize(eval.snapshot, schema, bounds);
    double r = reward(state, next, session.objective, schema);
    double obj = scalarize(next, session.objective, schema);
    buffer.push({state, action, r, next});
    agent->finish_step();
    best.offer(obj, mapped.config, step);
    applied = mapped.config;

    auto t2 = std::chrono::steady_clock::now();
    if (agent->past_warmup()) agent->learn(buffer);
    auto t3 = std::chrono::steady_clock::now();

    StepRecord rec;
    rec.step = step;
    rec.action_raw = std::move(action);
    rec.config = mapped.config;
    rec.snapshot = std::move(eval.snapshot);
    rec.state = next;
    rec.reward = r;
    rec.objective = obj;
    rec.best_objective = best.objective;
    rec.best_config = best.config;
    rec.downtime_s = eval.simulated_downtime_s;
    rec.action_time_s = harness_detail::seconds_between(t0, t1);
    rec.update_time_s = harness_detail::seconds_between(t2, t3);
    trace.steps.push_back(std::move(rec));

    state = std::move(next);
    if (step % 10 == 0) persist();
  }
  persist();

  TuneResult result;
  result.recommended = best.valid ? best.config : desc.default_config;
  result.recommended_objective = best.valid ? best.objective : default_objective;
  result.checkpoint_file = ckpt_file;
  result.start_step = start_step;
  result.measurement_window_s = desc.measurement_window_s;
  trace.recommended = result.recommended;
  trace.recommended_objective = result.recommended_objective;
  return result;
}

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over the repeats
  std::vector<double> values;
};

// Repeated measurements of one configuration, aggregated.
inline EvalStats evaluate(Environment& env, const ObjectiveSpec& objective,
                          const Configuration& config, std::size_t repeats) {
  if (repeats < 1) throw ValidationError("repeats must be >= 1");
  const MetricSchema& schema = env.descriptor().schema;
  objective.check_against(schema);
  RunningBounds bounds;
  EvalStats stats;
  for (std::size_t i = 0; i < repeats; ++i) {
    auto eval = env.apply(config);
    StateVector state = normalize(eval.snapshot, schema, bounds);
    stats.values.push_back(scalarize(state, objective, schema));
  }
  for (double v : stats.values) stats.mean += v;
  stats.mean /= static_cast<double>(repeats);
  double var = 0.0;
  for (double v : stats.values) var += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(var / static_cast<double>(repeats));
  return stats;
}

struct GridOracleResult {
  Configuration optimum;
  double value = 0.0;
  std::size_t grid_points = 0;           // feasible points actually evaluated
  std::vector<std::size_t> axis_sizes;   // per-parameter grid cardinality
};

// Exhaustive noise-free sweep of a simulator profile: discrete parameters
// fully enumerated, continuous parameters at `resolution` points evenly
// spaced in mapped coordinates. Ties keep the lowest grid index (parameter 0
// is the most significant axis).
inline GridOracleResult run_grid_oracle(const SimProfile& profile, const ObjectiveSpec& objective,
                                        std::size_t resolution) {
  if (resolution < 1) throw ValidationError("resolution must be >= 1");
  SimProfile quiet = profile.with_noise(0.0);
  quiet.check();
  MetricSchema schema = quiet.schema();
  objective.check_against(schema);

  std::vector<std::vector<double>> axes(quiet.space.size());
  for (std::size_t p = 0; p < quiet.space.size(); ++p) {
    const auto& def = quiet.space.param(p);
    if (def.is_discrete()) {
      for (double v = def.min_value; v <= def.max_value; v += 1.0) axes[p].push_back(v);
    } else if (resolution == 1) {
      axes[p].push_back(def.min_value);
    } else {
      for (std::size_t j = 0; j < resolution; ++j)
        axes[p].push_back(
            def.from_unit_raw(static_cast<double>(j) / static_cast<double>(resolution - 1)));
    }
  }

  GridOracleResult result;
  for (const auto& axis : axes) result.axis_sizes.push_back(axis.size());

  Rng rng = make_rng(0, /*stream=*/0x02);  // feeds zero-amplitude noise draws
  RunningBounds bounds;
  std::vector<std::size_t> idx(axes.size(), 0);
  bool have_best = false;
  while (true) {
    std::vector<double> values(axes.size());
    for (std::size_t p = 0; p < axes.size(); ++p) values[p] = axes[p][idx[p]];
    Configuration config(std::move(values));
    if (quiet.space.validate(config).empty()) {
      auto snapshot = sim_response(quiet, config, rng);
      StateVector state = normalize(snapshot, schema, bounds);
      double value = scalarize(state, objective, schema);
      ++result.grid_points;
      if (!have_best || value > result.value) {
        have_best = true;
        result.value = value;
        result.optimum = config;
      }
    }
    std::size_t p = axes.size();
    while (p > 0) {
      --p;
      if (++idx[p] < axes[p].size()) break;
      idx[p] = 0;
      if (p == 0) {
        if (!have_best)
          throw ValidationError("no feasible grid point under the space's constraints");
        return result;
      }
    }
  }
}

inline GridOracleResult run_grid_oracle(const Environment& env, const ObjectiveSpec& objective,
                                        std::size_t resolution) {
  const auto* sim = dynamic_cast<const SimEnv*>(&env);
  if (!sim) throw ValidationError("the grid oracle needs a simulated environment");
  return run_grid_oracle(sim->profile(), objective, resolution);
}

}  // namespace knobtune

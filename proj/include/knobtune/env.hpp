#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "knobtune/errors.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

// What has to be restarted for a change of this parameter to take effect.
enum class RestartKind : std::uint8_t { Workload = 0, Dfs = 1 };

inline const char* to_string(RestartKind k) {
  return k == RestartKind::Dfs ? "dfs" : "workload";
}

struct EnvDescriptor {
  ParameterSpace space;
  MetricSchema schema;
  std::vector<RestartKind> restart_kinds;  // aligned with space
  Configuration default_config;
  double measurement_window_s = 120.0;
};

struct EvaluationResult {
  MetricsSnapshot snapshot;
  double simulated_downtime_s = 0.0;
  double measurement_duration_s = 0.0;
  std::optional<RestartKind> restart_applied;
};

// The environment contract: apply a configuration, get a schema-complete
// snapshot back. reset() measures whatever is currently applied without
// spending a tuning evaluation. set_applied adopts a configuration without
// restart accounting (session resume).
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvDescriptor& descriptor() const = 0;
  virtual EvaluationResult reset() = 0;
  virtual EvaluationResult apply(const Configuration& config) = 0;
  virtual void set_applied(const Configuration& config) = 0;
  virtual bool is_simulated() const { return false; }
};

// Restart-cost constants; workload restarts draw uniformly from the range,
// DFS restarts cost a flat 30 seconds.
inline constexpr double kWorkloadRestartMin = 12.0;
inline constexpr double kWorkloadRestartMax = 20.0;
inline constexpr double kDfsRestartSeconds = 30.0;

// One separable gaussian bump in mapped [0,1] coordinates. The center is
// declared in native units and converted through the owning space.
struct GaussianBump {
  double weight = 1.0;
  std::vector<double> center_native;
  std::vector<double> width_unit;
};

struct IndicatorSurface {
  std::string name;
  std::string unit;
  MetricScope scope = MetricScope::Server;
  double peak = 1.0;
  std::vector<GaussianBump> bumps;  // bumps[0] is the primary optimum

  // Noise-free surface value at mapped coordinates.
  double value_at(const std::vector<double>& unit_coords,
                  const std::vector<std::vector<double>>& centers_unit) const {
    double sum = 0.0;
    for (std::size_t b = 0; b < bumps.size(); ++b) {
      double expo = 0.0;
      for (std::size_t p = 0; p < unit_coords.size(); ++p) {
        double d = unit_coords[p] - centers_unit[b][p];
        double w = bumps[b].width_unit[p];
        expo += d * d / (2.0 * w * w);
      }
      sum += bumps[b].weight * std::exp(-expo);
    }
    return peak * sum;
  }
};

// A Table-I style metric derived from the indicators: either affine in the
// indicator ratios (value = base + sum coeff * indicator/peak) or inverse
// (value = base / (1 + sum coeff * indicator/peak)).
struct AuxMetric {
  std::string name;
  std::string unit;
  MetricScope scope = MetricScope::Client;
  double norm_min = 0.0;
  double norm_max = 1.0;
  double base = 0.0;
  bool inverse = false;
  std::map<std::string, double> coeffs;  // indicator name -> coefficient
  double noise_scale = 0.0;              // absolute sigma at noise_frac = 0.05 is 0.05*noise_scale
};

// A workload response surface: what the simulated DFS reports for a given
// configuration. Stands in for a real cluster at desk scale.
struct SimProfile {
  std::string name;
  ParameterSpace space;
  std::vector<RestartKind> restart_kinds;
  Configuration default_config;
  double noise_frac = 0.05;
  std::vector<IndicatorSurface> indicators;
  std::vector<AuxMetric> aux_metrics;

  MetricSchema schema() const {
    std::vector<MetricDescriptor> metrics;
    for (const auto& ind : indicators)
      metrics.push_back({ind.name, ind.unit, ind.scope, 0.0, ind.peak});
    for (const auto& aux : aux_metrics)
      metrics.push_back({aux.name, aux.unit, aux.scope, aux.norm_min, aux.norm_max});
    return MetricSchema(std::move(metrics));
  }

  const IndicatorSurface& indicator(const std::string& ind_name) const {
    for (const auto& ind : indicators)
      if (ind.name == ind_name) return ind;
    throw ValidationError("profile " + name + " has no indicator " + ind_name);
  }

  // Native-unit location of an indicator's primary optimum.
  Configuration primary_optimum(const std::string& ind_name) const {
    return Configuration(indicator(ind_name).bumps.at(0).center_native);
  }

  SimProfile with_noise(double frac) const {
    SimProfile copy = *this;
    copy.noise_frac = frac;
    return copy;
  }

  void check() const {
    if (space.size() == 0) throw ValidationError("profile needs at least one parameter");
    if (restart_kinds.size() != space.size())
      throw ValidationError("profile must declare a restart kind per parameter");
    if (!(noise_frac >= 0.0 && noise_frac <= 0.5))
      throw ValidationError("noise_frac must lie in [0, 0.5]");
    space.require_valid(default_config);
    if (indicators.empty()) throw ValidationError("profile needs at least one indicator");
    for (const auto& ind : indicators) {
      if (!(ind.peak > 0.0)) throw ValidationError(ind.name + ": peak must be positive");
      if (ind.bumps.empty()) throw ValidationError(ind.name + ": needs at least one bump");
      for (const auto& b : ind.bumps) {
        if (b.center_native.size() != space.size() || b.width_unit.size() != space.size())
          throw ValidationError(ind.name + ": bump dimensions must match the parameter space");
        if (!(b.weight > 0.0)) throw ValidationError(ind.name + ": bump weight must be positive");
        for (double w : b.width_unit)
          if (!(w > 0.0)) throw ValidationError(ind.name + ": bump widths must be positive");
        space.require_valid(Configuration(b.center_native));
      }
    }
    for (const auto& aux : aux_metrics) {
      if (!(aux.norm_min < aux.norm_max))
        throw ValidationError(aux.name + ": norm_min must be < norm_max");
      for (const auto& [ind_name, coeff] : aux.coeffs) {
        (void)coeff;
        indicator(ind_name);  // throws when unknown
      }
    }
    schema();  // validates name uniqueness
  }
};

// Raw simulated measurement: indicator surfaces plus derived auxiliary
// metrics, with gaussian noise scaled by the profile's noise fraction.
// Timestamps are left at zero; the environment stamps the window.
inline MetricsSnapshot sim_response(const SimProfile& profile, const Configuration& config,
                                    Rng& rng) {
  profile.space.require_valid(config);
  std::vector<double> coords(profile.space.size());
  for (std::size_t p = 0; p < coords.size(); ++p)
    coords[p] = profile.space.param(p).to_unit(config.values[p]);

  MetricsSnapshot snapshot;
  std::map<std::string, double> indicator_ratio;
  for (const auto& ind : profile.indicators) {
    std::vector<std::vector<double>> centers;
    centers.reserve(ind.bumps.size());
    for (const auto& b : ind.bumps) {
      std::vector<double> c(profile.space.size());
      for (std::size_t p = 0; p < c.size(); ++p)
        c[p] = profile.space.param(p).to_unit(b.center_native[p]);
      centers.push_back(std::move(c));
    }
    double v = ind.value_at(coords, centers);
    v += profile.noise_frac * ind.peak * gaussian(rng);
    v = std::max(0.0, v);
    snapshot.values[ind.name] = v;
    indicator_ratio[ind.name] = v / ind.peak;
  }
  for (const auto& aux : profile.aux_metrics) {
    double combo = 0.0;
    for (const auto& [ind_name, coeff] : aux.coeffs) combo += coeff * indicator_ratio.at(ind_name);
    double v = aux.inverse ? aux.base / std::max(0.2, 1.0 + combo) : aux.base + combo;
    v += profile.noise_frac * aux.noise_scale * gaussian(rng);
    snapshot.values[aux.name] = std::max(0.0, v);
  }
  return snapshot;
}

// Simulated DFS environment: applies configurations to an internal clock,
// accounts restart downtime by the strongest restart kind among changed
// parameters, and serves noisy measurements off the profile surface.
class SimEnv : public Environment {
 public:
  SimEnv(SimProfile profile, std::uint64_t seed)
      : profile_(std::move(profile)), rng_(make_rng(seed, /*stream=*/0xE2)) {
    profile_.check();
    descriptor_ = EnvDescriptor{profile_.space, profile_.schema(), profile_.restart_kinds,
                                profile_.default_config, kSimWindowSeconds};
    applied_ = profile_.default_config;
  }

  static constexpr double kSimWindowSeconds = 120.0;

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  bool is_simulated() const override { return true; }
  const SimProfile& profile() const { return profile_; }
  const Configuration& applied() const { return applied_; }

  void set_applied(const Configuration& config) override {
    profile_.space.require_valid(config);
    applied_ = config;
  }

  EvaluationResult reset() override { return measure(0.0, std::nullopt); }

  EvaluationResult apply(const Configuration& config) override {
    profile_.space.require_valid(config);
    std::optional<RestartKind> strongest;
    for (std::size_t p = 0; p < config.size(); ++p) {
      if (config.values[p] == applied_.values[p]) continue;
      RestartKind kind = profile_.restart_kinds[p];
      if (!strongest || kind == RestartKind::Dfs) strongest = kind;
    }
    double downtime = 0.0;
    if (strongest == RestartKind::Dfs)
      downtime = kDfsRestartSeconds;
    else if (strongest == RestartKind::Workload)
      downtime = uniform_in(rng_, kWorkloadRestartMin, kWorkloadRestartMax);
    applied_ = config;
    return measure(downtime, strongest);
  }

 private:
  EvaluationResult measure(double downtime, std::optional<RestartKind> restart) {
    sim_time_ += downtime;
    EvaluationResult result;
    result.snapshot = sim_response(profile_, applied_, rng_);
    result.snapshot.window_start = sim_time_;
    sim_time_ += kSimWindowSeconds;
    result.snapshot.window_end = sim_time_;
    result.simulated_downtime_s = downtime;
    result.measurement_duration_s = kSimWindowSeconds;
    result.restart_applied = restart;
    return result;
  }

  SimProfile profile_;
  EnvDescriptor descriptor_;
  Configuration applied_;
  double sim_time_ = 0.0;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Built-in workload profiles. Two Lustre file-layout parameters are tuned:
// stripe_count (how many storage targets a file spans) and stripe_size (the
// chunk size per stripe, log-scaled). Both take effect on workload restart.
// Surface optima sit on the 25-point log grid used by the grid oracle so the
// oracle's argmax is exactly the declared optimum.
// ---------------------------------------------------------------------------

namespace profiles {

inline ParameterSpace stripe_space() {
  return ParameterSpace({
      {"stripe_count", ParamKind::Discrete, 1.0, 6.0, ParamScale::Linear},
      {"stripe_size", ParamKind::Continuous, 65536.0, 67108864.0, ParamScale::Log},
  });
}

// Native stripe_size for grid slot j of 24 (unit coordinate j/24).
inline double stripe_size_at(int grid_slot) {
  return stripe_space().param(1).from_unit_raw(static_cast<double>(grid_slot) / 24.0);
}

// Standard Table-I style auxiliary metric set. read_mix/write_mix shade the
// coefficients toward the workload's I/O character.
inline std::vector<AuxMetric> standard_aux(double read_mix, double write_mix) {
  const std::string thr = "throughput_mbps";
  const std::string iops = "iops";
  return {
      {"cur_dirty_bytes", "bytes", MetricScope::Client, 0.0, 6.0e7,
       2.0e6, false, {{thr, 3.0e7 * write_mix}}, 1.5e6},
      {"cur_grant_bytes", "bytes", MetricScope::Client, 0.0, 8.0e7,
       6.0e7, true, {{thr, 1.2 * write_mix}}, 2.0e6},
      {"read_rpcs_in_flight", "count", MetricScope::Client, 0.0, 40.0,
       2.0, false, {{iops, 28.0 * read_mix}}, 1.2},
      {"write_rpcs_in_flight", "count", MetricScope::Client, 0.0, 40.0,
       2.0, false, {{thr, 30.0 * write_mix}}, 1.2},
      {"pending_read_pages", "pages", MetricScope::Client, 0.0, 2500.0,
       100.0, false, {{iops, 1800.0 * read_mix}}, 80.0},
      {"pending_write_pages", "pages", MetricScope::Client, 0.0, 2500.0,
       2200.0, true, {{thr, 2.0 * write_mix}}, 80.0},
      {"cache_hit_ratio", "ratio", MetricScope::Client, 0.0, 1.0,
       0.35, false, {{iops, 0.45 * read_mix}}, 0.02},
      {"cpu_usage_idle", "percent", MetricScope::Server, 0.0, 100.0,
       72.0, false, {{thr, -30.0}, {iops, -12.0}}, 2.5},
      {"cpu_usage_iowait", "percent", MetricScope::Server, 0.0, 100.0,
       55.0, false, {{thr, -40.0}}, 2.5},
      {"ram_used_percent", "percent", MetricScope::Server, 0.0, 100.0,
       35.0, false, {{thr, 18.0}, {iops, 9.0}}, 2.0},
  };
}

inline Configuration stripe_default() {
  // Common DFS defaults: a single stripe of 1 MiB.
  return Configuration({1.0, 1048576.0});
}

inline SimProfile file_server() {
  SimProfile p;
  p.name = "file_server";
  p.space = stripe_space();
  p.restart_kinds = {RestartKind::Workload, RestartKind::Workload};
  p.default_config = stripe_default();
  p.noise_frac = 0.05;
  // Mixed create/read/write/append activity: a mid-size stripe across four
  // targets works best, with a weaker single-target local optimum at large
  // chunk sizes that a greedy search can get stuck on.
  p.indicators = {
      {"throughput_mbps", "MB/s", MetricScope::Server, 420.0,
       {{1.0, {4.0, stripe_size_at(10)}, {0.50, 0.48}},
        {0.55, {1.0, stripe_size_at(20)}, {0.26, 0.26}}}},
      {"iops", "ops/s", MetricScope::Server, 9500.0,
       {{1.0, {4.0, stripe_size_at(10)}, {0.52, 0.50}}}},
  };
  p.aux_metrics = standard_aux(0.6, 0.6);
  return p;
}

inline SimProfile video_server() {
  SimProfile p;
  p.name = "video_server";
  p.space = stripe_space();
  p.restart_kinds = {RestartKind::Workload, RestartKind::Workload};
  p.default_config = stripe_default();
  p.noise_frac = 0.05;
  // Large sequential streams: wide striping and big chunks.
  p.indicators = {
      {"throughput_mbps", "MB/s", MetricScope::Server, 640.0,
       {{1.0, {6.0, stripe_size_at(14)}, {0.52, 0.48}}}},
      {"iops", "ops/s", MetricScope::Server, 3800.0,
       {{1.0, {6.0, stripe_size_at(14)}, {0.54, 0.50}}}},
  };
  p.aux_metrics = standard_aux(0.8, 0.2);
  return p;
}

inline SimProfile seq_write() {
  SimProfile p;
  p.name = "seq_write";
  p.space = stripe_space();
  p.restart_kinds = {RestartKind::Workload, RestartKind::Workload};
  p.default_config = stripe_default();
  p.noise_frac = 0.05;
  p.indicators = {
      {"throughput_mbps", "MB/s", MetricScope::Server, 540.0,
       {{1.0, {5.0, stripe_size_at(16)}, {0.52, 0.50}}}},
      {"iops", "ops/s", MetricScope::Server, 5200.0,
       {{1.0, {5.0, stripe_size_at(16)}, {0.54, 0.52}}}},
  };
  p.aux_metrics = standard_aux(0.1, 0.9);
  return p;
}

inline SimProfile seq_read() {
  SimProfile p;
  p.name = "seq_read";
  p.space = stripe_space();
  p.restart_kinds = {RestartKind::Workload, RestartKind::Workload};
  p.default_config = stripe_default();
  p.noise_frac = 0.05;
  p.indicators = {
      {"throughput_mbps", "MB/s", MetricScope::Server, 720.0,
       {{1.0, {6.0, stripe_size_at(12)}, {0.50, 0.46}}}},
      {"iops", "ops/s", MetricScope::Server, 6400.0,
       {{1.0, {6.0, stripe_size_at(12)}, {0.52, 0.48}}}},
  };
  p.aux_metrics = standard_aux(0.9, 0.1);
  return p;
}

inline SimProfile random_rw() {
  SimProfile p;
  p.name = "random_rw";
  p.space = stripe_space();
  p.restart_kinds = {RestartKind::Workload, RestartKind::Workload};
  p.default_config = stripe_default();
  p.noise_frac = 0.05;
  // The random reader and the sequential-ish writer pull in different
  // directions: throughput favors few wide stripes, IOPS favors many narrow
  // ones. Weighted tuning has to trade the two off.
  p.indicators = {
      {"throughput_mbps", "MB/s", MetricScope::Server, 310.0,
       {{1.0, {3.0, stripe_size_at(16)}, {0.48, 0.48}}}},
      {"iops", "ops/s", MetricScope::Server, 11000.0,
       {{1.0, {5.0, stripe_size_at(6)}, {0.52, 0.52}}}},
  };
  p.aux_metrics = standard_aux(0.5, 0.5);
  return p;
}

inline std::vector<std::string> builtin_names() {
  return {"file_server", "video_server", "seq_write", "seq_read", "random_rw"};
}

inline SimProfile builtin(const std::string& name) {
  if (name == "file_server") return file_server();
  if (name == "video_server") return video_server();
  if (name == "seq_write") return seq_write();
  if (name == "seq_read") return seq_read();
  if (name == "random_rw") return random_rw();
  throw ValidationError("unknown built-in profile: " + name);
}

}  // namespace profiles

}  // namespace knobtune

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "knobtune/env.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/rng.hpp"
#include "knobtune/trace.hpp"

namespace knobtune {

// Per-parameter sub-ranges the search currently focuses on, in native units.
struct SearchBounds {
  std::vector<std::pair<double, double>> ranges;

  static SearchBounds full(const ParameterSpace& space) {
    SearchBounds b;
    b.ranges.reserve(space.size());
    for (const auto& p : space.params()) b.ranges.emplace_back(p.min_value, p.max_value);
    return b;
  }

  void check_against(const ParameterSpace& space) const {
    if (ranges.size() != space.size())
      throw ShapeError("bounds cover " + std::to_string(ranges.size()) + " parameters, expected " +
                       std::to_string(space.size()));
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      auto [lo, hi] = ranges[i];
      const auto& p = space.param(i);
      if (!(lo < hi)) throw ValidationError(p.name + ": search range is empty");
      if (lo < p.min_value || hi > p.max_value)
        throw ValidationError(p.name + ": search range leaves the parameter bounds");
    }
  }
};

struct SearchTrace {
  struct Entry {
    Configuration config;
    double objective = 0.0;
  };
  std::vector<Entry> entries;
  std::vector<double> best_so_far;
  std::vector<std::size_t> round_starts;  // entry index where each round begins
};

// Divide-and-diverge sampling: split every parameter's sub-range into n
// intervals and assign samples so each interval of each parameter is used
// exactly once (a latin hypercube over interval centers). The division
// happens in mapped [0,1] coordinates, so log-scale parameters divide
// evenly in the log domain.
inline std::vector<Configuration> dds_sample(const ParameterSpace& space,
                                             const SearchBounds& bounds, std::size_t n,
                                             Rng& rng) {
  if (n < 2) throw ValidationError("dds_sample needs n >= 2");
  bounds.check_against(space);

  std::vector<std::vector<std::size_t>> interval(space.size());
  for (std::size_t p = 0; p < space.size(); ++p) {
    auto& perm = interval[p];
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
  }

  std::vector<Configuration> configs;
  configs.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> action(space.size());
    for (std::size_t p = 0; p < space.size(); ++p) {
      const auto& def = space.param(p);
      double u_lo = def.to_unit(bounds.ranges[p].first);
      double u_hi = def.to_unit(bounds.ranges[p].second);
      double cell = (u_hi - u_lo) / static_cast<double>(n);
      double u = u_lo + (static_cast<double>(interval[p][s]) + 0.5) * cell;
      action[p] = std::clamp(u, 0.0, 1.0);
    }
    configs.push_back(space.map_action(action).config);
  }
  return configs;
}

// Shrink every sub-range to shrink * width, centered on the incumbent and
// clipped to the parameter bounds by shifting, so the width is preserved.
// Widths are measured in mapped coordinates, matching dds_sample.
inline SearchBounds rbs_shrink(const ParameterSpace& space, const SearchBounds& bounds,
                               const Configuration& best, double shrink) {
  if (!(shrink > 0.0 && shrink < 1.0)) throw ValidationError("shrink must lie in (0, 1)");
  bounds.check_against(space);
  space.require_valid(best);

  SearchBounds out;
  out.ranges.resize(space.size());
  for (std::size_t p = 0; p < space.size(); ++p) {
    const auto& def = space.param(p);
    double u_lo = def.to_unit(bounds.ranges[p].first);
    double u_hi = def.to_unit(bounds.ranges[p].second);
    double width = shrink * (u_hi - u_lo);
    double center = def.to_unit(best.values[p]);
    double lo = center - width / 2.0;
    double hi = center + width / 2.0;
    if (lo < 0.0) {
      lo = 0.0;
      hi = std::min(1.0, width);
    } else if (hi > 1.0) {
      hi = 1.0;
      lo = std::max(0.0, 1.0 - width);
    }
    // the unit round trip can land an ulp outside the bounds on log scales
    out.ranges[p] = {std::clamp(def.from_unit_raw(lo), def.min_value, def.max_value),
                     std::clamp(def.from_unit_raw(hi), def.min_value, def.max_value)};
  }
  return out;
}

struct BaselineSettings {
  std::size_t budget = 30;
  std::size_t samples_per_round = 10;
  double shrink = 0.5;
};

struct BaselineResult {
  SearchTrace search;
  Configuration recommended;
  double recommended_objective = 0.0;
};

// Rounds of dds_sample, each followed by shrinking the bounds around the
// best configuration seen so far, until exactly `budget` evaluations are
// spent. The caller-owned trace keeps whatever completed if the environment
// fails mid-run.
inline BaselineResult run_baseline(Environment& env, const ObjectiveSpec& objective,
                                   const BaselineSettings& settings, Rng& rng,
                                   TuningTrace& trace) {
  if (settings.budget < settings.samples_per_round)
    throw ValidationError("budget must be at least one round of samples");
  const auto& desc = env.descriptor();
  objective.check_against(desc.schema);

  trace.method = "baseline";
  trace.param_names.clear();
  for (const auto& p : desc.space.params()) trace.param_names.push_back(p.name);
  trace.metric_names = desc.schema.names();
  trace.objective_weights = objective.weights;
  trace.default_config = desc.default_config;

  RunningBounds norm_bounds;
  auto initial = env.reset();
  StateVector state0 = normalize(initial.snapshot, desc.schema, norm_bounds);
  trace.default_objective = scalarize(state0, objective, desc.schema);

  BaselineResult result;
  result.recommended = desc.default_config;
  result.recommended_objective = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  SearchBounds bounds = SearchBounds::full(desc.space);
  std::size_t evals = 0;
  while (evals < settings.budget) {
    result.search.round_starts.push_back(result.search.entries.size());
    auto configs = dds_sample(desc.space, bounds, settings.samples_per_round, rng);
    std::size_t take = std::min(configs.size(), settings.budget - evals);
    for (std::size_t i = 0; i < take; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      auto eval = env.apply(configs[i]);
      auto t1 = std::chrono::steady_clock::now();
      StateVector state = normalize(eval.snapshot, desc.schema, norm_bounds);
      double value = scalarize(state, objective, desc.schema);
      ++evals;

      if (!have_best || value > result.recommended_objective) {
        have_best = true;
        result.recommended_objective = value;
        result.recommended = configs[i];
      }
      result.search.entries.push_back({configs[i], value});
      result.search.best_so_far.push_back(result.recommended_objective);

      StepRecord rec;
      rec.step = evals;
      rec.action_raw = desc.space.unmap_config(configs[i]);
      rec.config = configs[i];
      rec.snapshot = eval.snapshot;
      rec.state = state;
      rec.reward = 0.0;
      rec.objective = value;
      rec.best_objective = result.recommended_objective;
      rec.best_config = result.recommended;
      rec.downtime_s = eval.simulated_downtime_s;
      rec.action_time_s = std::chrono::duration<double>(t1 - t0).count();
      rec.update_time_s = 0.0;
      trace.steps.push_back(std::move(rec));
    }
    bounds = rbs_shrink(desc.space, bounds, result.recommended, settings.shrink);
  }

  trace.recommended = result.recommended;
  trace.recommended_objective = result.recommended_objective;
  return result;
}

}  // namespace knobtune

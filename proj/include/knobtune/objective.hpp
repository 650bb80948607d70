#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "knobtune/errors.hpp"

namespace knobtune {

enum class MetricScope { Server, Client };

struct MetricDescriptor {
  std::string name;
  std::string unit;
  MetricScope scope = MetricScope::Server;
  // Normalization bounds from domain knowledge. When unset, the running
  // min/max tracker supplies them.
  std::optional<double> norm_min;
  std::optional<double> norm_max;
};

class MetricSchema {
 public:
  MetricSchema() = default;

  explicit MetricSchema(std::vector<MetricDescriptor> metrics) : metrics_(std::move(metrics)) {
    std::set<std::string> names;
    for (const auto& m : metrics_) {
      if (m.name.empty()) throw ValidationError("metric with empty name");
      if (!names.insert(m.name).second)
        throw ValidationError("duplicate metric name: " + m.name);
      if (m.norm_min && m.norm_max && !(*m.norm_min < *m.norm_max))
        throw ValidationError(m.name + ": norm_min must be < norm_max");
    }
  }

  std::size_t size() const { return metrics_.size(); }
  const std::vector<MetricDescriptor>& metrics() const { return metrics_; }
  const MetricDescriptor& metric(std::size_t i) const { return metrics_[i]; }

  bool has(const std::string& name) const {
    for (const auto& m : metrics_)
      if (m.name == name) return true;
    return false;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < metrics_.size(); ++i)
      if (metrics_[i].name == name) return i;
    throw ValidationError("unknown metric: " + name);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(metrics_.size());
    for (const auto& m : metrics_) out.push_back(m.name);
    return out;
  }

 private:
  std::vector<MetricDescriptor> metrics_;
};

// Tuning preference as metric-name -> weight. Metrics absent from the map
// carry weight 0; metrics whose improvement means decrease take negative
// weights.
struct ObjectiveSpec {
  std::map<std::string, double> weights;

  void check_against(const MetricSchema& schema) const {
    bool any_nonzero = false;
    for (const auto& [name, w] : weights) {
      if (!schema.has(name)) throw ValidationError("objective references unknown metric: " + name);
      if (w != 0.0) any_nonzero = true;
    }
    if (!any_nonzero) throw ValidationError("objective needs at least one nonzero weight");
  }

  // Full-length weight vector aligned to schema order.
  std::vector<double> weight_vector(const MetricSchema& schema) const {
    std::vector<double> w(schema.size(), 0.0);
    for (const auto& [name, weight] : weights) w[schema.index_of(name)] = weight;
    return w;
  }
};

struct MetricsSnapshot {
  std::map<std::string, double> values;
  double window_start = 0.0;
  double window_end = 0.0;
};

// Normalized metric vector, every component in [0,1], schema order.
using StateVector = std::vector<double>;

// Running min/max per metric, the fallback when a descriptor declares no
// explicit normalization bounds.
class RunningBounds {
 public:
  struct Entry {
    bool seen = false;
    double min = 0.0;
    double max = 0.0;
  };

  void update(const std::string& name, double value) {
    auto& e = entries_[name];
    if (!e.seen) {
      e.seen = true;
      e.min = e.max = value;
    } else {
      e.min = std::min(e.min, value);
      e.max = std::max(e.max, value);
    }
  }

  const Entry* find(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

// Min-max normalization into [0,1]^k. The tracker is updated with the
// snapshot first, then bounds resolve per metric: descriptor bounds when set,
// running bounds otherwise. Degenerate bounds (min == max) yield 0.5.
inline StateVector normalize(const MetricsSnapshot& snapshot, const MetricSchema& schema,
                             RunningBounds& bounds) {
  std::vector<std::string> missing;
  for (const auto& m : schema.metrics())
    if (!snapshot.values.count(m.name)) missing.push_back(m.name);
  if (!missing.empty()) {
    std::string msg = "snapshot missing metrics:";
    for (const auto& name : missing) msg += " " + name;
    throw IncompleteSnapshotError(msg, std::move(missing));
  }

  for (const auto& m : schema.metrics()) bounds.update(m.name, snapshot.values.at(m.name));

  StateVector state(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& m = schema.metric(i);
    double v = snapshot.values.at(m.name);
    const auto* running = bounds.find(m.name);
    double lo = m.norm_min ? *m.norm_min : running->min;
    double hi = m.norm_max ? *m.norm_max : running->max;
    state[i] = lo < hi ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.5;
  }
  return state;
}

// Linear scalarization: weighted sum of normalized metrics.
inline double scalarize(const StateVector& state, const ObjectiveSpec& objective,
                        const MetricSchema& schema) {
  if (state.size() != schema.size())
    throw ShapeError("state has length " + std::to_string(state.size()) + ", expected " +
                     std::to_string(schema.size()));
  auto w = objective.weight_vector(schema);
  double sum = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) sum += w[i] * state[i];
  return sum;
}

inline constexpr double kRewardEps = 1e-6;
inline constexpr double kRewardClipLo = -1.0;
inline constexpr double kRewardClipHi = 10.0;

// Proportional change of the scalarized objective between consecutive
// states, denominator floored at eps, clipped to [-1, 10].
inline double reward(const StateVector& prev, const StateVector& next,
                     const ObjectiveSpec& objective, const MetricSchema& schema) {
  double before = scalarize(prev, objective, schema);
  double after = scalarize(next, objective, schema);
  double r = (after - before) / std::max(before, kRewardEps);
  return std::clamp(r, kRewardClipLo, kRewardClipHi);
}

}  // namespace knobtune

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "knobtune/errors.hpp"

namespace knobtune {

enum class ParamKind { Continuous, Discrete };

// Log-scale parameters are mapped affinely in log2 of their native value;
// linear parameters directly in their native value.
enum class ParamScale { Linear, Log };

enum class Comparator { Less, LessEq, GreaterEq, Greater };

inline const char* to_string(Comparator op) {
  switch (op) {
    case Comparator::Less: return "<";
    case Comparator::LessEq: return "<=";
    case Comparator::GreaterEq: return ">=";
    case Comparator::Greater: return ">";
  }
  return "?";
}

struct ParameterDef {
  std::string name;
  ParamKind kind = ParamKind::Continuous;
  double min_value = 0.0;
  double max_value = 1.0;
  ParamScale scale = ParamScale::Linear;

  bool is_discrete() const { return kind == ParamKind::Discrete; }

  // Native value -> unit interval. For discrete parameters this is the
  // cell-center coordinate, the exact inverse of from_unit after rounding.
  double to_unit(double value) const {
    if (scale == ParamScale::Log) {
      return (std::log2(value) - std::log2(min_value)) /
             (std::log2(max_value) - std::log2(min_value));
    }
    return (value - min_value) / (max_value - min_value);
  }

  // Unit interval -> native value without discrete rounding.
  double from_unit_raw(double a) const {
    if (scale == ParamScale::Log) {
      double lo = std::log2(min_value), hi = std::log2(max_value);
      return std::exp2(a * (hi - lo) + lo);
    }
    return a * (max_value - min_value) + min_value;
  }

  // Unit interval -> native value. Discrete parameters round half-up, which
  // gives the endpoint values half-width cells.
  double from_unit(double a) const {
    double v = from_unit_raw(a);
    if (is_discrete()) v = std::floor(v + 0.5);
    return v;
  }
};

struct Constraint {
  std::size_t param_index = 0;
  Comparator op = Comparator::LessEq;
  double bound = 0.0;
};

// One concrete assignment, values in native units, ordered as the space.
struct Configuration {
  std::vector<double> values;

  Configuration() = default;
  explicit Configuration(std::vector<double> v) : values(std::move(v)) {}
  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const Configuration& other) const { return values == other.values; }
};

struct Violation {
  enum class Kind { BelowMin, AboveMax, NotIntegral, Constraint };
  std::size_t param_index = 0;
  Kind kind = Kind::BelowMin;
  double value = 0.0;
  double bound = 0.0;       // offending bound (or constraint bound)
  Comparator op = Comparator::LessEq;  // only meaningful for Kind::Constraint
};

struct MappedAction {
  Configuration config;
  bool projected = false;  // true when constraint projection moved any value
};

class ParameterSpace {
 public:
  ParameterSpace() = default;

  ParameterSpace(std::vector<ParameterDef> params, std::vector<Constraint> constraints = {})
      : params_(std::move(params)), constraints_(std::move(constraints)) {
    check_definition();
    compute_feasible_intervals();
  }

  std::size_t size() const { return params_.size(); }
  const std::vector<ParameterDef>& params() const { return params_; }
  const ParameterDef& param(std::size_t i) const { return params_[i]; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    throw ValidationError("unknown parameter: " + name);
  }

  // Feasible [lo, hi] for a parameter after intersecting bounds with all
  // constraints. Strict comparators over continuous domains are tightened by
  // one ulp; over discrete domains by one integer step.
  std::pair<double, double> feasible_interval(std::size_t i) const { return feasible_[i]; }

  MappedAction map_action(const std::vector<double>& action) const {
    if (action.size() != params_.size())
      throw ShapeError("action has length " + std::to_string(action.size()) +
                       ", expected " + std::to_string(params_.size()));
    MappedAction out;
    out.config.values.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      double a = action[i];
      if (!(a >= 0.0 && a <= 1.0))
        throw InvalidActionError("action component " + std::to_string(i) +
                                 " = " + std::to_string(a) + " outside [0,1]");
      double v = params_[i].from_unit(a);
      auto [lo, hi] = feasible_[i];
      double projected = std::clamp(v, lo, hi);
      if (projected != v) out.projected = true;
      out.config.values[i] = projected;
    }
    return out;
  }

  std::vector<double> unmap_config(const Configuration& config) const {
    require_valid(config);
    std::vector<double> action(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      action[i] = params_[i].to_unit(config.values[i]);
    return action;
  }

  std::vector<Violation> validate(const Configuration& config) const {
    if (config.size() != params_.size())
      throw ShapeError("configuration has length " + std::to_string(config.size()) +
                       ", expected " + std::to_string(params_.size()));
    std::vector<Violation> violations;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& p = params_[i];
      double v = config.values[i];
      if (v < p.min_value)
        violations.push_back({i, Violation::Kind::BelowMin, v, p.min_value});
      else if (v > p.max_value)
        violations.push_back({i, Violation::Kind::AboveMax, v, p.max_value});
      if (p.is_discrete() && v != std::floor(v))
        violations.push_back({i, Violation::Kind::NotIntegral, v, 0.0});
    }
    for (const auto& c : constraints_) {
      double v = config.values[c.param_index];
      if (!satisfies(v, c.op, c.bound))
        violations.push_back({c.param_index, Violation::Kind::Constraint, v, c.bound, c.op});
    }
    return violations;
  }

  void require_valid(const Configuration& config) const {
    auto violations = validate(config);
    if (!violations.empty()) throw ValidationError(describe(violations));
  }

  std::string describe(const std::vector<Violation>& violations) const {
    std::string msg = "invalid configuration:";
    for (const auto& v : violations) {
      msg += " [" + params_[v.param_index].name + ": ";
      switch (v.kind) {
        case Violation::Kind::BelowMin:
          msg += std::to_string(v.value) + " below min " + std::to_string(v.bound); break;
        case Violation::Kind::AboveMax:
          msg += std::to_string(v.value) + " above max " + std::to_string(v.bound); break;
        case Violation::Kind::NotIntegral:
          msg += std::to_string(v.value) + " not integral"; break;
        case Violation::Kind::Constraint:
          msg += std::to_string(v.value) + " violates " + to_string(v.op) + " " +
                 std::to_string(v.bound); break;
      }
      msg += "]";
    }
    return msg;
  }

  static bool satisfies(double v, Comparator op, double bound) {
    switch (op) {
      case Comparator::Less: return v < bound;
      case Comparator::LessEq: return v <= bound;
      case Comparator::GreaterEq: return v >= bound;
      case Comparator::Greater: return v > bound;
    }
    return false;
  }

 private:
  void check_definition() const {
    std::set<std::string> names;
    for (const auto& p : params_) {
      if (p.name.empty()) throw ValidationError("parameter with empty name");
      if (!names.insert(p.name).second)
        throw ValidationError("duplicate parameter name: " + p.name);
      if (!(p.min_value < p.max_value))
        throw ValidationError(p.name + ": min must be < max");
      if (p.is_discrete() &&
          (p.min_value != std::floor(p.min_value) || p.max_value != std::floor(p.max_value)))
        throw ValidationError(p.name + ": discrete bounds must be integral");
      if (p.scale == ParamScale::Log && !(p.min_value > 0.0))
        throw ValidationError(p.name + ": log scale requires min > 0");
    }
    for (const auto& c : constraints_) {
      if (c.param_index >= params_.size())
        throw ValidationError("constraint references parameter index " +
                              std::to_string(c.param_index) + " out of range");
    }
  }

  void compute_feasible_intervals() {
    feasible_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      feasible_[i] = {params_[i].min_value, params_[i].max_value};
    for (const auto& c : constraints_) {
      auto& [lo, hi] = feasible_[c.param_index];
      bool discrete = params_[c.param_index].is_discrete();
      switch (c.op) {
        case Comparator::LessEq:
          hi = std::min(hi, discrete ? std::floor(c.bound) : c.bound);
          break;
        case Comparator::Less:
          hi = std::min(hi, discrete ? std::ceil(c.bound) - 1.0
                                     : std::nextafter(c.bound, -std::numeric_limits<double>::infinity()));
          break;
        case Comparator::GreaterEq:
          lo = std::max(lo, discrete ? std::ceil(c.bound) : c.bound);
          break;
        case Comparator::Greater:
          lo = std::max(lo, discrete ? std::floor(c.bound) + 1.0
                                     : std::nextafter(c.bound, std::numeric_limits<double>::infinity()));
          break;
      }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto [lo, hi] = feasible_[i];
      if (!(lo <= hi))
        throw ValidationError(params_[i].name + ": constraints leave no feasible value");
    }
  }

  std::vector<ParameterDef> params_;
  std::vector<Constraint> constraints_;
  std::vector<std::pair<double, double>> feasible_;
};

}  // namespace knobtune

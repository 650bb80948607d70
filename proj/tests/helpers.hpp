#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "knobtune/env.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"

namespace testutil {

// Unique scratch directory under the build tree, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("knobtune_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Scriptable environment: serves values from a fixed sequence (repeating the
// last one) and can throw after a set number of apply calls.
class StubEnv : public knobtune::Environment {
 public:
  StubEnv(knobtune::ParameterSpace space, std::vector<double> throughput_sequence,
          std::size_t fail_after = SIZE_MAX)
      : sequence_(std::move(throughput_sequence)), fail_after_(fail_after) {
    desc_.space = std::move(space);
    desc_.schema = knobtune::MetricSchema({{"throughput_mbps", "MB/s",
                                            knobtune::MetricScope::Server, 0.0, 100.0}});
    desc_.restart_kinds.assign(desc_.space.size(), knobtune::RestartKind::Workload);
    std::vector<double> defaults;
    for (const auto& p : desc_.space.params()) defaults.push_back(p.min_value);
    desc_.default_config = knobtune::Configuration(defaults);
    applied_ = desc_.default_config;
  }

  const knobtune::EnvDescriptor& descriptor() const override { return desc_; }
  std::size_t apply_calls() const { return apply_calls_; }
  std::size_t reset_calls() const { return reset_calls_; }
  const std::vector<knobtune::Configuration>& applied_history() const { return history_; }

  knobtune::EvaluationResult reset() override {
    ++reset_calls_;
    return measure();
  }

  knobtune::EvaluationResult apply(const knobtune::Configuration& config) override {
    desc_.space.require_valid(config);
    if (apply_calls_ >= fail_after_) throw knobtune::TransportError("stub environment failure");
    ++apply_calls_;
    applied_ = config;
    history_.push_back(config);
    return measure();
  }

  void set_applied(const knobtune::Configuration& config) override { applied_ = config; }

 private:
  knobtune::EvaluationResult measure() {
    knobtune::EvaluationResult r;
    std::size_t i = std::min(cursor_, sequence_.size() - 1);
    r.snapshot.values["throughput_mbps"] = sequence_[i];
    ++cursor_;
    r.simulated_downtime_s = 0.0;
    r.measurement_duration_s = 1.0;
    return r;
  }

  knobtune::EnvDescriptor desc_;
  knobtune::Configuration applied_;
  std::vector<knobtune::Configuration> history_;
  std::vector<double> sequence_;
  std::size_t cursor_ = 0;
  std::size_t apply_calls_ = 0;
  std::size_t reset_calls_ = 0;
  std::size_t fail_after_;
};

inline knobtune::ParameterSpace one_param_space() {
  return knobtune::ParameterSpace(
      {{"alpha", knobtune::ParamKind::Continuous, 0.0, 10.0, knobtune::ParamScale::Linear}});
}

}  // namespace testutil

#pragma once

#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "httplib.h"
#include "knobtune/env.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/objective.hpp"

namespace knobtune {

// Where to fetch measurements from: an HTTP time-series endpoint
// (http:// or https:// URL), or a replay file with one sample per line.
struct TsEndpoint {
  std::string url;
  std::string token;  // optional bearer token

  bool is_http() const {
    return url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0;
  }
};

// Endpoint from KNOBTUNE_TS_URL / KNOBTUNE_TS_TOKEN, overridable by an
// explicit URL (the part after "external:" in the env selection string).
inline TsEndpoint ts_endpoint_from_env(const std::string& url_override = "") {
  TsEndpoint ep;
  if (!url_override.empty()) {
    ep.url = url_override;
  } else if (const char* u = std::getenv("KNOBTUNE_TS_URL")) {
    ep.url = u;
  }
  if (const char* t = std::getenv("KNOBTUNE_TS_TOKEN")) ep.token = t;
  if (ep.url.empty())
    throw ValidationError("no time-series endpoint: pass external:<url> or set KNOBTUNE_TS_URL");
  return ep;
}

namespace detail {

struct SeriesAccum {
  double sum = 0.0;
  std::size_t count = 0;
};

inline MetricsSnapshot finish_query(const std::map<std::string, SeriesAccum>& accum,
                                    const std::vector<std::string>& names, double window_start,
                                    double window_end) {
  MetricsSnapshot snapshot;
  snapshot.window_start = window_start;
  snapshot.window_end = window_end;
  std::vector<std::string> missing;
  for (const auto& name : names) {
    auto it = accum.find(name);
    if (it == accum.end() || it->second.count == 0) {
      missing.push_back(name);
      continue;
    }
    snapshot.values[name] = it->second.sum / static_cast<double>(it->second.count);
  }
  if (!missing.empty()) {
    std::string msg = "no samples in window for:";
    for (const auto& name : missing) msg += " " + name;
    throw IncompleteSnapshotError(msg, std::move(missing));
  }
  return snapshot;
}

// `name value` lines, one sample each. Blank lines and #-comments ignored.
inline MetricsSnapshot query_http(const TsEndpoint& endpoint,
                                  const std::vector<std::string>& names, double window_s) {
  auto path_pos = endpoint.url.find('/', endpoint.url.find("://") + 3);
  std::string base = endpoint.url.substr(0, path_pos);
  std::string path = path_pos == std::string::npos ? "/" : endpoint.url.substr(path_pos);

  std::string query = path;
  query += path.find('?') == std::string::npos ? "?" : "&";
  query += "metrics=";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) query += ",";
    query += names[i];
  }
  query += "&window=" + std::to_string(window_s);

  httplib::Client client(base);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);
  httplib::Headers headers;
  if (!endpoint.token.empty()) headers.emplace("Authorization", "Bearer " + endpoint.token);

  auto res = client.Get(query, headers);
  if (!res)
    throw TransportError("cannot reach " + base + ": " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403)
    throw TransportError("authentication rejected by " + base + " (status " +
                         std::to_string(res->status) + ")");
  if (res->status != 200)
    throw TransportError(base + " returned status " + std::to_string(res->status));

  std::map<std::string, SeriesAccum> accum;
  std::istringstream body(res->body);
  std::string line;
  while (std::getline(body, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name;
    double value;
    if (!(fields >> name >> value))
      throw TransportError("malformed response line: " + line);
    auto& a = accum[name];
    a.sum += value;
    a.count += 1;
  }
  return finish_query(accum, names, 0.0, window_s);
}

// `name timestamp value` lines; the trailing window ends at the newest
// timestamp in the file.
inline MetricsSnapshot query_replay_file(const TsEndpoint& endpoint,
                                         const std::vector<std::string>& names, double window_s) {
  std::ifstream in(endpoint.url);
  if (!in) throw TransportError("cannot open replay file " + endpoint.url);

  struct Sample {
    std::string name;
    double timestamp;
    double value;
  };
  std::vector<Sample> samples;
  double t_end = -std::numeric_limits<double>::infinity();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Sample s;
    if (!(fields >> s.name >> s.timestamp >> s.value))
      throw TransportError("malformed replay line: " + line);
    t_end = std::max(t_end, s.timestamp);
    samples.push_back(std::move(s));
  }

  std::map<std::string, SeriesAccum> accum;
  double t_start = t_end - window_s;
  for (const auto& s : samples) {
    if (s.timestamp < t_start || s.timestamp > t_end) continue;
    auto& a = accum[s.name];
    a.sum += s.value;
    a.count += 1;
  }
  return finish_query(accum, names, t_start, t_end);
}

}  // namespace detail

// Mean of each named series over the trailing window.
inline MetricsSnapshot ts_query(const TsEndpoint& endpoint, const std::vector<std::string>& names,
                                double window_s) {
  if (!(window_s > 0.0)) throw ValidationError("query window must be positive");
  return endpoint.is_http() ? detail::query_http(endpoint, names, window_s)
                            : detail::query_replay_file(endpoint, names, window_s);
}

// Measurement-only environment over a live metrics endpoint. Applying a
// configuration records it and queries the endpoint; actually pushing
// parameters into the target system happens outside this process.
class ExternalEnv : public Environment {
 public:
  ExternalEnv(EnvDescriptor descriptor, TsEndpoint endpoint)
      : descriptor_(std::move(descriptor)), endpoint_(std::move(endpoint)) {
    if (descriptor_.restart_kinds.size() != descriptor_.space.size())
      throw ValidationError("descriptor must declare a restart kind per parameter");
    descriptor_.space.require_valid(descriptor_.default_config);
    applied_ = descriptor_.default_config;
  }

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  const Configuration& applied() const { return applied_; }
  void set_applied(const Configuration& config) override {
    descriptor_.space.require_valid(config);
    applied_ = config;
  }

  EvaluationResult reset() override { return measure(std::nullopt); }

  EvaluationResult apply(const Configuration& config) override {
    descriptor_.space.require_valid(config);
    std::optional<RestartKind> strongest;
    for (std::size_t p = 0; p < config.size(); ++p) {
      if (config.values[p] == applied_.values[p]) continue;
      RestartKind kind = descriptor_.restart_kinds[p];
      if (!strongest || kind == RestartKind::Dfs) strongest = kind;
    }
    applied_ = config;
    return measure(strongest);
  }

 private:
  EvaluationResult measure(std::optional<RestartKind> restart) {
    EvaluationResult result;
    result.snapshot =
        ts_query(endpoint_, descriptor_.schema.names(), descriptor_.measurement_window_s);
    result.simulated_downtime_s = 0.0;  // real downtime happens outside this process
    result.measurement_duration_s = descriptor_.measurement_window_s;
    result.restart_applied = restart;
    return result;
  }

  EnvDescriptor descriptor_;
  TsEndpoint endpoint_;
  Configuration applied_;
};

}  // namespace knobtune

// End-to-end guarantees for the tuner, one per numbered criterion. Run with
// no arguments to check everything, or pass criterion numbers to run a
// subset. Prints one PASS/FAIL line per criterion; exits non-zero if any
// requested criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "knobtune/baseline.hpp"
#include "knobtune/harness.hpp"

using namespace knobtune;

namespace {

const std::vector<std::string> kProfiles = {"file_server", "video_server", "seq_write",
                                            "seq_read", "random_rw"};
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct SessionOutcome {
  TuningTrace trace;
  TuneResult result;
  double wall_s = 0.0;
};

SessionOutcome run_ddpg(const testutil::TempDir& tmp, const std::string& profile,
                        std::uint64_t seed, std::size_t steps, const ObjectiveSpec& objective,
                        bool resume = false) {
  SessionConfig session;
  session.env_selection = "sim:" + profile;
  session.objective = objective;
  session.steps = steps;
  session.seed = seed;
  session.resume = resume;
  session.out_dir = tmp.file(profile + "_seed" + std::to_string(seed));
  SessionOutcome out;
  auto t0 = std::chrono::steady_clock::now();
  out.result = run_tuning(session, out.trace);
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------

bool criterion_convergence(std::string& detail) {
  testutil::TempDir tmp("accept1");
  ObjectiveSpec objective{{{"throughput_mbps", 1.0}}};
  double worst_ratio = 1e300;
  std::string worst_profile;
  double slowest = 0.0;
  for (const auto& profile : kProfiles) {
    auto oracle = run_grid_oracle(profiles::builtin(profile), objective, 25);
    std::vector<double> bests;
    for (auto seed : kSeeds) {
      auto out = run_ddpg(tmp, profile, seed, 30, objective);
      bests.push_back(out.result.recommended_objective);
      slowest = std::max(slowest, out.wall_s);
    }
    double ratio = median(bests) / oracle.value;
    if (ratio < worst_ratio) {
      worst_ratio = ratio;
      worst_profile = profile;
    }
  }
  detail = "median best / oracle >= 0.90 needed; worst " + fmt(worst_ratio) + " on " +
           worst_profile + "; slowest session " + fmt(slowest) + " s (limit 120)";
  return worst_ratio >= 0.90 && slowest < 120.0;
}

bool criterion_baseline(std::string& detail) {
  testutil::TempDir tmp("accept2");
  ObjectiveSpec objective{{{"throughput_mbps", 1.0}}};
  int wins = 0;
  std::ostringstream per_profile;
  for (const auto& profile : kProfiles) {
    std::vector<double> ddpg_bests, baseline_bests;
    for (auto seed : kSeeds) {
      ddpg_bests.push_back(run_ddpg(tmp, profile, seed, 30, objective)
                               .result.recommended_objective);
      SimEnv env(profiles::builtin(profile), seed);
      auto rng = make_rng(seed, 0xBA);
      TuningTrace trace;
      auto res = run_baseline(env, objective, BaselineSettings{30, 10, 0.5}, rng, trace);
      baseline_bests.push_back(res.recommended_objective);
    }
    double d = median(ddpg_bests), b = median(baseline_bests);
    if (d >= b) ++wins;
    per_profile << " " << profile << " " << fmt(d) << (d >= b ? ">=" : "<") << fmt(b);
  }
  detail = "tuner median >= baseline median on " + std::to_string(wins) +
           "/5 profiles (need 3):" + per_profile.str();
  return wins >= 3;
}

bool criterion_multi_objective(std::string& detail) {
  testutil::TempDir tmp("accept3");
  ObjectiveSpec objective{{{"throughput_mbps", 1.0}, {"iops", 1.0}}};
  auto oracle = run_grid_oracle(profiles::random_rw(), objective, 25);
  std::vector<double> bests;
  for (auto seed : kSeeds)
    bests.push_back(run_ddpg(tmp, "random_rw", seed, 30, objective)
                        .result.recommended_objective);
  double ratio = median(bests) / oracle.value;
  detail = "weighted objective on random_rw: median best / oracle = " + fmt(ratio) +
           " (need >= 0.85, oracle " + fmt(oracle.value) + ")";
  return ratio >= 0.85;
}

bool criterion_progressive(std::string& detail) {
  testutil::TempDir tmp("accept4");
  ObjectiveSpec objective{{{"throughput_mbps", 1.0}}};
  std::ostringstream per_profile;
  bool ok = true;
  for (const auto& profile : kProfiles) {
    std::vector<double> best30, best100;
    for (auto seed : kSeeds) {
      auto first = run_ddpg(tmp, profile, seed, 30, objective);
      auto second = run_ddpg(tmp, profile, seed, 100, objective, /*resume=*/true);
      best30.push_back(first.result.recommended_objective);
      best100.push_back(second.result.recommended_objective);

      double floor = -1e300;
      for (const auto& r : first.trace.steps) {
        if (r.best_objective + 1e-12 < floor) ok = false;
        floor = std::max(floor, r.best_objective);
      }
      for (const auto& r : second.trace.steps) {
        if (r.best_objective + 1e-12 < floor) ok = false;
        floor = std::max(floor, r.best_objective);
      }
      if (second.result.recommended_objective + 1e-12 < first.result.recommended_objective)
        ok = false;
    }
    double m30 = median(best30), m100 = median(best100);
    if (m100 + 1e-12 < m30) ok = false;
    per_profile << " " << profile << " " << fmt(m30) << "->" << fmt(m100);
  }
  detail = std::string("best-so-far monotone across resume, median at 100 >= median at 30:") +
           per_profile.str();
  return ok;
}

// Keeps the probe point away from ReLU kinks so central differences see a
// smooth function.
double min_hidden_preactivation(const Mlp& net, const std::vector<double>& x) {
  double lo = 1e300;
  std::vector<double> act = x;
  const auto& sizes = net.layer_sizes();
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    std::vector<double> pre(sizes[l + 1]);
    for (std::size_t j = 0; j < pre.size(); ++j) {
      double sum = net.biases()[l][j];
      for (std::size_t i = 0; i < sizes[l]; ++i)
        sum += net.weights()[l][j * sizes[l] + i] * act[i];
      pre[j] = sum;
      lo = std::min(lo, std::abs(sum));
    }
    std::vector<double> next(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j) next[j] = std::max(0.0, pre[j]);
    act = std::move(next);
  }
  return lo;
}

bool criterion_gradients(std::string& detail) {
  auto rng = make_rng(77, 0x05);
  const double h = 1e-5;
  double max_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t depth = 1 + (trial % 2);  // one or two hidden layers
    std::vector<std::size_t> sizes;
    sizes.push_back(1 + static_cast<std::size_t>(uniform_in(rng, 0.0, 10.0)));
    for (std::size_t d = 0; d < depth; ++d)
      sizes.push_back(1 + static_cast<std::size_t>(uniform_in(rng, 0.0, 64.0)));
    sizes.push_back(1 + static_cast<std::size_t>(uniform_in(rng, 0.0, 4.0)));
    auto activation = trial % 2 ? OutputActivation::Identity : OutputActivation::Sigmoid;

    Mlp net(sizes, activation);
    net.init_uniform(rng);
    std::vector<double> x(net.input_size()), u(net.output_size());
    do {
      for (auto& v : x) v = uniform_in(rng, -1.0, 1.0);
    } while (min_hidden_preactivation(net, x) < 1e-3);
    for (auto& v : u) v = uniform_in(rng, -1.0, 1.0);

    auto grads = net.zero_gradients();
    net.backward(x, u, grads);

    auto loss = [&](const Mlp& m) {
      auto y = m.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += u[i] * y[i];
      return s;
    };
    auto probe = [&](double* param, double analytic) {
      double keep = *param;
      *param = keep + h;
      double up = loss(net);
      *param = keep - h;
      double down = loss(net);
      *param = keep;
      double fd = (up - down) / (2.0 * h);
      double rel = std::abs(fd - analytic) / std::max({1.0, std::abs(fd), std::abs(analytic)});
      max_rel = std::max(max_rel, rel);
    };
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (std::size_t i = 0; i < net.weights()[l].size(); ++i)
        probe(&net.weights()[l][i], grads.weights[l][i]);
      for (std::size_t i = 0; i < net.biases()[l].size(); ++i)
        probe(&net.biases()[l][i], grads.biases[l][i]);
    }
  }
  detail = "max relative error backward vs central differences = " + fmt(max_rel) +
           " over 20 networks (need <= 1e-4)";
  return max_rel <= 1e-4;
}

bool criterion_learning(std::string& detail) {
  // Critic: gamma = 0 turns the Bellman target into plain regression on the
  // reward; 200 passes over a fixed batch must cut the error by 90%.
  AgentHyper hyper;
  hyper.gamma = 0.0;
  hyper.batch_size = 16;
  hyper.updates_per_step = 1;
  DdpgAgent agent(3, 2, hyper, 42);
  ReplayBuffer buffer(16);
  auto rng = make_rng(43);
  std::vector<Transition> fixed;
  for (int i = 0; i < 16; ++i) {
    Transition t;
    t.state = {uniform01(rng), uniform01(rng), uniform01(rng)};
    t.action = {uniform01(rng), uniform01(rng)};
    t.reward = t.action[0] - 0.5;
    t.next_state = t.state;
    fixed.push_back(t);
    buffer.push(t);
  }
  auto mse = [&] {
    double s = 0.0;
    for (const auto& t : fixed) {
      std::vector<double> sa(t.state);
      sa.insert(sa.end(), t.action.begin(), t.action.end());
      double q = agent.critic().forward(sa)[0];
      s += (q - t.reward) * (q - t.reward);
    }
    return s / 16.0;
  };
  double before = mse();
  for (int i = 0; i < 200; ++i) agent.learn(buffer);
  double after = mse();
  bool critic_ok = after <= 0.10 * before;

  // Actor against a synthetic critic with a known optimum at 0.7.
  auto actor_rng = make_rng(7);
  Mlp actor({3, 32, 1}, OutputActivation::Sigmoid);
  actor.init_uniform(actor_rng, 1e-3);
  auto opt = AdamState::for_net(actor, 1e-2);
  std::vector<std::vector<double>> states;
  for (int i = 0; i < 8; ++i)
    states.push_back({uniform01(actor_rng), uniform01(actor_rng), uniform01(actor_rng)});
  for (int step = 0; step < 500; ++step) {
    auto grads = actor.zero_gradients();
    for (const auto& s : states) {
      double a = actor.forward(s)[0];
      std::vector<double> upstream{2.0 * (a - 0.7) / 8.0};
      actor.backward(s, upstream, grads);
    }
    adam_step(actor, grads, opt);
  }
  double worst = 0.0;
  for (const auto& s : states) worst = std::max(worst, std::abs(actor.forward(s)[0] - 0.7));
  bool actor_ok = worst < 0.05;

  detail = "critic error ratio after 200 updates " + fmt(before > 0 ? after / before : 0.0) +
           " (need <= 0.1); actor worst |output - 0.7| " + fmt(worst) + " (need < 0.05)";
  return critic_ok && actor_ok;
}

bool criterion_invariants(std::string& detail) {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Action mapping: examples, bounds, coverage, round-trip.
  ParameterDef d19{"d", ParamKind::Discrete, 1.0, 9.0, ParamScale::Linear};
  ParameterDef d14{"d", ParamKind::Discrete, 1.0, 4.0, ParamScale::Linear};
  ParameterDef d16{"d", ParamKind::Discrete, 1.0, 6.0, ParamScale::Linear};
  ParameterDef logp{"s", ParamKind::Continuous, 65536.0, 67108864.0, ParamScale::Log};
  expect(d19.from_unit(0.5) == 5.0, "map 0.5 on [1,9]");
  expect(d14.from_unit(0.5) == 3.0, "map 0.5 on [1,4]");
  expect(std::abs(logp.from_unit(0.5) - 2097152.0) < 1e-6, "log map midpoint");
  expect(std::abs(d19.to_unit(5.0) - 0.5) < 1e-12, "unmap 5 on [1,9]");
  ParameterSpace one_d({d19});
  bool bounds_ok = false;
  try {
    one_d.map_action({1.01});
  } catch (const InvalidActionError&) {
    try {
      one_d.map_action({-0.01});
    } catch (const InvalidActionError&) {
      bounds_ok = true;
    }
  }
  expect(bounds_ok, "action bounds rejected");
  std::vector<bool> hit(6, false);
  for (int j = 0; j < 60; ++j) {
    double v = d16.from_unit(j / 59.0);
    hit[static_cast<std::size_t>(v) - 1] = true;
    expect(d16.from_unit(d16.to_unit(v)) == v, "discrete round-trip");
  }
  expect(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }), "coverage of [1,6]");

  // Reward: zero, sign, clip (single metric already normalized to [0,1]).
  MetricSchema unit_schema({{"obj", "", MetricScope::Server, 0.0, 1.0}});
  ObjectiveSpec unit_obj{{{"obj", 1.0}}};
  auto reward1 = [&](double before, double after) {
    return reward(StateVector{before}, StateVector{after}, unit_obj, unit_schema);
  };
  expect(std::abs(reward1(0.5, 0.6) - 0.2) < 1e-12, "reward 0.5->0.6");
  expect(reward1(0.7, 0.7) == 0.0, "reward flat");
  expect(reward1(0.6, 0.5) < 0.0, "reward sign");
  expect(reward1(1.0, 0.0) == -1.0, "reward lower clip");
  expect(reward1(0.0, 1.0) == 10.0, "reward upper clip");

  // Replay: FIFO eviction and uniform sampling.
  {
    ReplayBuffer buf(3);
    for (int i = 1; i <= 4; ++i) {
      Transition t;
      t.state = {0.0};
      t.action = {0.0};
      t.reward = i;
      t.next_state = {0.0};
      buf.push(t);
    }
    auto rng = make_rng(5);
    std::vector<double> seen;
    for (const auto& t : buf.sample(3, rng)) seen.push_back(t.reward);
    std::sort(seen.begin(), seen.end());
    expect(seen == std::vector<double>{2.0, 3.0, 4.0}, "fifo eviction");

    ReplayBuffer four(4);
    for (int i = 0; i < 4; ++i) {
      Transition t;
      t.state = {0.0};
      t.action = {0.0};
      t.reward = i;
      t.next_state = {0.0};
      four.push(t);
    }
    auto draw_rng = make_rng(2026);
    std::vector<double> counts(4, 0.0);
    for (int i = 0; i < 10000; ++i)
      counts[static_cast<std::size_t>(four.sample(1, draw_rng)[0].reward)] += 1.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - 2500.0) * (c - 2500.0) / 2500.0;
    // 3 degrees of freedom: mean 3, stddev sqrt(6)
    expect(chi2 <= 3.0 + 3.0 * std::sqrt(6.0), "sampling uniformity chi-square " + fmt(chi2));
  }

  // Soft update exactness.
  {
    auto rng = make_rng(8);
    Mlp online({2, 4, 1}, OutputActivation::Identity), target = online;
    online.init_uniform(rng);
    target.init_uniform(rng);
    Mlp before = target;
    soft_update(target, online, 0.0);
    expect(target.weights() == before.weights() && target.biases() == before.biases(),
           "soft update tau 0");
    soft_update(target, online, 1.0);
    expect(target.weights() == online.weights() && target.biases() == online.biases(),
           "soft update tau 1");
    target = before;
    soft_update(target, online, 0.5);
    bool mid_ok = true;
    for (std::size_t l = 0; l < target.weights().size(); ++l)
      for (std::size_t i = 0; i < target.weights()[l].size(); ++i)
        if (target.weights()[l][i] != 0.5 * before.weights()[l][i] + 0.5 * online.weights()[l][i])
          mid_ok = false;
    expect(mid_ok, "soft update tau 0.5");
  }

  // Checkpoint round-trip is bit-exact.
  {
    AgentHyper hyper;
    hyper.hidden = {8, 8};
    DdpgAgent agent(3, 2, hyper, 9);
    ReplayBuffer buf(8);
    auto rng = make_rng(10);
    for (int i = 0; i < 5; ++i) {
      Transition t;
      t.state = {uniform01(rng), uniform01(rng), uniform01(rng)};
      t.action = {uniform01(rng), uniform01(rng)};
      t.reward = uniform01(rng);
      t.next_state = t.state;
      buf.push(t);
    }
    agent.learn(buf);
    std::stringstream s1, s2;
    agent.save(s1);
    agent.save(s2);
    expect(s1.str() == s2.str(), "checkpoint bytes deterministic");
    auto loaded = DdpgAgent::load(s1);
    std::stringstream s3;
    loaded.save(s3);
    expect(s3.str() == s2.str(), "checkpoint reload byte-stable");
    bool acts_equal = true;
    for (int i = 0; i < 20; ++i) {
      StateVector state{uniform01(rng), uniform01(rng), uniform01(rng)};
      if (agent.act(state, false) != loaded.act(state, false)) acts_equal = false;
    }
    expect(acts_equal, "policy identical after reload");
  }

  // Trace determinism and exact budgets for both tuner and baseline.
  {
    testutil::TempDir tmp("accept7");
    ObjectiveSpec objective{{{"throughput_mbps", 1.0}}};
    SessionConfig session;
    session.env_selection = "sim:file_server";
    session.steps = 8;
    session.seed = 31;
    session.agent.hidden = {16, 16};
    session.agent.updates_per_step = 2;
    session.out_dir = tmp.file("run_a");
    TuningTrace a;
    run_tuning(session, a);
    session.out_dir = tmp.file("run_b");
    TuningTrace b;
    run_tuning(session, b);
    bool same = a.steps.size() == b.steps.size() && a.steps.size() == 8;
    for (std::size_t i = 0; same && i < a.steps.size(); ++i) {
      same = a.steps[i].step == i + 1 && a.steps[i].action_raw == b.steps[i].action_raw &&
             a.steps[i].config.values == b.steps[i].config.values &&
             a.steps[i].state == b.steps[i].state && a.steps[i].reward == b.steps[i].reward &&
             a.steps[i].objective == b.steps[i].objective &&
             a.steps[i].downtime_s == b.steps[i].downtime_s;
    }
    expect(same, "trace determinism and tuner budget");

    testutil::StubEnv stub(testutil::one_param_space(), {10, 20, 30, 40, 50});
    auto rng = make_rng(3, 0xBA);
    TuningTrace trace;
    run_baseline(stub, objective, BaselineSettings{23, 10, 0.5}, rng, trace);
    expect(stub.apply_calls() == 23 && trace.steps.size() == 23 && stub.reset_calls() == 1,
           "baseline budget");
  }

  if (failures.empty()) {
    detail = "mapping, reward, replay, soft-update, checkpoint, determinism and budget checks all hold";
    return true;
  }
  detail = "failed: ";
  for (std::size_t i = 0; i < failures.size(); ++i)
    detail += (i ? ", " : "") + failures[i];
  return false;
}

bool criterion_downtime(std::string& detail) {
  testutil::TempDir tmp("accept8");
  auto out = run_ddpg(tmp, "seq_write", 11, 30, ObjectiveSpec{{{"throughput_mbps", 1.0}}});
  double total = out.trace.total_downtime_s();
  detail = "total simulated downtime over 30 workload-restart steps = " + fmt(total) +
           " s (need within [360, 600])";
  return total >= 360.0 && total <= 600.0 && out.trace.steps.size() == 30;
}

struct Criterion {
  int number;
  const char* name;
  bool (*run)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "convergence to oracle", criterion_convergence},
    {2, "beats sampling baseline", criterion_baseline},
    {3, "multi-objective tuning", criterion_multi_objective},
    {4, "progressive tuning", criterion_progressive},
    {5, "gradient correctness", criterion_gradients},
    {6, "critic and actor learning", criterion_learning},
    {7, "mechanical invariants", criterion_invariants},
    {8, "downtime accounting", criterion_downtime},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    int n = std::atoi(argv[i]);
    if (n < 1 || n > 8) {
      std::fprintf(stderr, "usage: %s [criterion 1..8]...\n", argv[0]);
      return 2;
    }
    wanted.push_back(n);
  }
  if (wanted.empty())
    for (const auto& c : kCriteria) wanted.push_back(c.number);

  bool all_ok = true;
  for (int n : wanted) {
    const auto& c = kCriteria[n - 1];
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("unexpected error: ") + e.what();
    }
    std::printf("criterion %d (%s): %s - %s\n", n, c.name, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}

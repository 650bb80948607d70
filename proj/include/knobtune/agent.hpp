#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "knobtune/binio.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/nnet.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/param_space.hpp"
#include "knobtune/replay.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

struct AgentHyper {
  double gamma = 0.9;
  double tau = 0.005;
  std::size_t batch_size = 16;
  std::size_t updates_per_step = 8;
  std::size_t warmup_steps = 5;
  double noise_sigma_start = 0.3;
  double noise_sigma_end = 0.05;
  std::size_t noise_decay_steps = 50;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t replay_capacity = 64;

  void check() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0,1]");
    if (batch_size == 0 || updates_per_step == 0) throw ValidationError("batch_size and updates_per_step must be positive");
    if (noise_decay_steps == 0) throw ValidationError("noise_decay_steps must be positive");
    if (!(noise_sigma_start >= 0.0 && noise_sigma_end >= 0.0)) throw ValidationError("noise sigmas must be non-negative");
    if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw ValidationError("learning rates must be positive");
    if (replay_capacity == 0) throw ValidationError("replay_capacity must be positive");
    if (hidden.empty()) throw ValidationError("at least one hidden layer required");
  }
};

struct LearnReport {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  std::size_t updates = 0;
  bool skipped = false;  // empty buffer, nothing learned
};

// Highest scalarized objective observed so far and where it was seen.
struct BestSeen {
  bool valid = false;
  double objective = -std::numeric_limits<double>::infinity();
  Configuration config;
  std::size_t step = 0;

  void offer(double value, const Configuration& cfg, std::size_t at_step) {
    if (!valid || value > objective) {
      valid = true;
      objective = value;
      config = cfg;
      step = at_step;
    }
  }
};

// DDPG: deterministic actor with additive exploration noise, critic trained
// on the one-step Bellman target, target copies updated by soft interpolation.
class DdpgAgent {
 public:
  DdpgAgent(std::size_t state_dim, std::size_t action_dim, AgentHyper hyper, std::uint64_t seed)
      : hyper_(std::move(hyper)), state_dim_(state_dim), action_dim_(action_dim),
        rng_(make_rng(seed, /*stream=*/0x61)) {
    hyper_.check();
    if (state_dim == 0 || action_dim == 0) throw ShapeError("state and action dims must be positive");
    std::vector<std::size_t> actor_sizes{state_dim};
    actor_sizes.insert(actor_sizes.end(), hyper_.hidden.begin(), hyper_.hidden.end());
    actor_sizes.push_back(action_dim);
    std::vector<std::size_t> critic_sizes{state_dim + action_dim};
    critic_sizes.insert(critic_sizes.end(), hyper_.hidden.begin(), hyper_.hidden.end());
    critic_sizes.push_back(1);

    actor_ = Mlp(actor_sizes, OutputActivation::Sigmoid);
    critic_ = Mlp(critic_sizes, OutputActivation::Identity);
    // Small final actor layer keeps the initial policy near mid-range
    // instead of a saturated sigmoid.
    actor_.init_uniform(rng_, 1e-3);
    critic_.init_uniform(rng_);
    actor_target_ = actor_;
    critic_target_ = critic_;
    actor_opt_ = AdamState::for_net(actor_, hyper_.actor_lr);
    critic_opt_ = AdamState::for_net(critic_, hyper_.critic_lr);
  }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const AgentHyper& hyper() const { return hyper_; }
  std::size_t step_count() const { return step_count_; }
  void finish_step() { ++step_count_; }
  bool past_warmup() const { return step_count_ >= hyper_.warmup_steps; }

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic_target() const { return critic_target_; }
  Rng& rng() { return rng_; }

  // Linearly decayed exploration sigma for the current step.
  double noise_sigma() const {
    double frac = std::min(1.0, static_cast<double>(step_count_) /
                                    static_cast<double>(hyper_.noise_decay_steps));
    return hyper_.noise_sigma_start + (hyper_.noise_sigma_end - hyper_.noise_sigma_start) * frac;
  }

  // explore=false is exactly the deterministic policy. With explore=true the
  // warmup steps draw uniformly from the action hypercube, afterwards
  // gaussian noise is added and the result clipped back into [0,1]^m.
  std::vector<double> act(const StateVector& state, bool explore) {
    if (state.size() != state_dim_)
      throw ShapeError("state has length " + std::to_string(state.size()) + ", expected " +
                       std::to_string(state_dim_));
    if (explore && step_count_ < hyper_.warmup_steps) {
      std::vector<double> a(action_dim_);
      for (auto& x : a) x = uniform01(rng_);
      return a;
    }
    auto a = actor_.forward(state);
    if (explore) {
      double sigma = noise_sigma();
      for (auto& x : a) x = std::clamp(x + sigma * gaussian(rng_), 0.0, 1.0);
    }
    return a;
  }

  // One learning call: updates_per_step rounds of critic regression on the
  // Bellman target, actor ascent through the frozen critic, and soft target
  // updates. Loss figures are averaged over the rounds, measured before each
  // update.
  LearnReport learn(ReplayBuffer& buffer) {
    LearnReport report;
    if (buffer.empty()) {
      report.skipped = true;
      return report;
    }
    const double batch = static_cast<double>(hyper_.batch_size);
    for (std::size_t round = 0; round < hyper_.updates_per_step; ++round) {
      auto transitions = buffer.sample(hyper_.batch_size, rng_);

      // Critic: minimize mean squared (Q(s,a) - (r + gamma Q_targ(s', mu_targ(s')))).
      auto critic_grads = critic_.zero_gradients();
      double critic_loss = 0.0;
      for (const auto& t : transitions) {
        auto next_action = actor_target_.forward(t.next_state);
        double q_next = critic_target_.forward(concat(t.next_state, next_action))[0];
        double target = t.reward + hyper_.gamma * q_next;
        auto sa = concat(t.state, t.action);
        double q = critic_.forward(sa)[0];
        double diff = q - target;
        critic_loss += diff * diff;
        std::vector<double> upstream{2.0 * diff / batch};
        critic_.backward(sa, upstream, critic_grads);
      }
      critic_loss /= batch;
      adam_step(critic_, critic_grads, critic_opt_);

      // Actor: ascend mean Q(s, mu(s)); gradients flow through the frozen
      // critic into the actor only.
      auto actor_grads = actor_.zero_gradients();
      double actor_objective = 0.0;
      for (const auto& t : transitions) {
        auto action = actor_.forward(t.state);
        auto sa = concat(t.state, action);
        actor_objective += critic_.forward(sa)[0];
        auto scratch = critic_.zero_gradients();
        std::vector<double> upstream{1.0};
        auto d_input = critic_.backward(sa, upstream, scratch);
        std::vector<double> d_action(d_input.begin() + static_cast<std::ptrdiff_t>(state_dim_),
                                     d_input.end());
        for (auto& g : d_action) g *= -1.0 / batch;  // ascent as negated descent
        actor_.backward(t.state, d_action, actor_grads);
      }
      actor_objective /= batch;
      adam_step(actor_, actor_grads, actor_opt_);

      soft_update(actor_target_, actor_, hyper_.tau);
      soft_update(critic_target_, critic_, hyper_.tau);

      report.critic_loss += critic_loss;
      report.actor_objective += actor_objective;
    }
    report.updates = hyper_.updates_per_step;
    report.critic_loss /= static_cast<double>(hyper_.updates_per_step);
    report.actor_objective /= static_cast<double>(hyper_.updates_per_step);
    return report;
  }

  void save(std::ostream& os) const {
    save_hyper(os);
    binio::write_u64(os, state_dim_);
    binio::write_u64(os, action_dim_);
    actor_.save(os);
    critic_.save(os);
    actor_target_.save(os);
    critic_target_.save(os);
    actor_opt_.save(os);
    critic_opt_.save(os);
    binio::write_u64(os, step_count_);
    binio::write_string(os, rng_to_string(rng_));
  }

  static DdpgAgent load(std::istream& is) {
    AgentHyper hyper = load_hyper(is);
    std::uint64_t state_dim = binio::read_u64(is);
    std::uint64_t action_dim = binio::read_u64(is);
    DdpgAgent agent(state_dim, action_dim, hyper, /*seed=*/0);
    agent.actor_ = Mlp::load(is);
    agent.critic_ = Mlp::load(is);
    agent.actor_target_ = Mlp::load(is);
    agent.critic_target_ = Mlp::load(is);
    agent.actor_opt_ = AdamState::load(is);
    agent.critic_opt_ = AdamState::load(is);
    agent.step_count_ = binio::read_u64(is);
    agent.rng_ = rng_from_string(binio::read_string(is));
    agent.check_shapes();
    return agent;
  }

 private:
  static std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  void save_hyper(std::ostream& os) const {
    binio::write_f64(os, hyper_.gamma);
    binio::write_f64(os, hyper_.tau);
    binio::write_u64(os, hyper_.batch_size);
    binio::write_u64(os, hyper_.updates_per_step);
    binio::write_u64(os, hyper_.warmup_steps);
    binio::write_f64(os, hyper_.noise_sigma_start);
    binio::write_f64(os, hyper_.noise_sigma_end);
    binio::write_u64(os, hyper_.noise_decay_steps);
    binio::write_f64(os, hyper_.actor_lr);
    binio::write_f64(os, hyper_.critic_lr);
    binio::write_u64(os, hyper_.hidden.size());
    for (auto h : hyper_.hidden) binio::write_u64(os, h);
    binio::write_u64(os, hyper_.replay_capacity);
  }

  static AgentHyper load_hyper(std::istream& is) {
    AgentHyper h;
    h.gamma = binio::read_f64(is);
    h.tau = binio::read_f64(is);
    h.batch_size = binio::read_u64(is);
    h.updates_per_step = binio::read_u64(is);
    h.warmup_steps = binio::read_u64(is);
    h.noise_sigma_start = binio::read_f64(is);
    h.noise_sigma_end = binio::read_f64(is);
    h.noise_decay_steps = binio::read_u64(is);
    h.actor_lr = binio::read_f64(is);
    h.critic_lr = binio::read_f64(is);
    std::uint64_t n_hidden = binio::read_u64(is);
    if (n_hidden == 0 || n_hidden > 16) throw CheckpointError("bad hidden layer count");
    h.hidden.resize(n_hidden);
    for (auto& x : h.hidden) x = binio::read_u64(is);
    h.replay_capacity = binio::read_u64(is);
    h.check();
    return h;
  }

  void check_shapes() const {
    if (actor_.input_size() != state_dim_ || actor_.output_size() != action_dim_ ||
        critic_.input_size() != state_dim_ + action_dim_ || critic_.output_size() != 1 ||
        !actor_target_.same_shape(actor_) || !critic_target_.same_shape(critic_))
      throw CheckpointError("checkpoint network shapes inconsistent with dimensions");
  }

  AgentHyper hyper_;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  Mlp actor_, critic_, actor_target_, critic_target_;
  AdamState actor_opt_, critic_opt_;
  std::size_t step_count_ = 0;
  Rng rng_;
};

// Everything needed to resume an interrupted or finished tuning session.
struct Checkpoint {
  DdpgAgent agent;
  ReplayBuffer buffer;
  RunningBounds bounds;
  BestSeen best;
  double default_objective = 0.0;
  StateVector last_state;
  Configuration last_config;
};

inline constexpr char kCheckpointMagic[4] = {'K', 'T', 'C', 'P'};
inline constexpr std::uint64_t kCheckpointVersion = 1;

// Binary layout (little-endian throughout, doubles as IEEE-754 bit patterns):
// magic "KTCP", u64 version, agent block (hyper, dims, four networks, two
// Adam states, step count, RNG stream), replay buffer, running bounds,
// best-seen record, default objective, last state, last applied configuration.
inline void save_checkpoint(const std::filesystem::path& path, const DdpgAgent& agent,
                            const ReplayBuffer& buffer, const RunningBounds& bounds,
                            const BestSeen& best, double default_objective,
                            const StateVector& last_state, const Configuration& last_config) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, 4);
  binio::write_u64(os, kCheckpointVersion);
  agent.save(os);
  buffer.save(os);
  binio::write_u64(os, bounds.entries().size());
  for (const auto& [name, entry] : bounds.entries()) {
    binio::write_string(os, name);
    binio::write_u8(os, entry.seen ? 1 : 0);
    binio::write_f64(os, entry.min);
    binio::write_f64(os, entry.max);
  }
  binio::write_u8(os, best.valid ? 1 : 0);
  binio::write_f64(os, best.objective);
  binio::write_u64(os, best.step);
  binio::write_f64_vec(os, best.config.values);
  binio::write_f64(os, default_objective);
  binio::write_f64_vec(os, last_state);
  binio::write_f64_vec(os, last_config.values);
  if (!os) throw CheckpointError("failed writing checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || !std::equal(magic, magic + 4, kCheckpointMagic))
    throw CheckpointError("not a checkpoint file: " + path.string());
  std::uint64_t version = binio::read_u64(is);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  DdpgAgent agent = DdpgAgent::load(is);
  ReplayBuffer buffer = ReplayBuffer::load(is);
  RunningBounds bounds;
  std::uint64_t n_bounds = binio::read_u64(is);
  if (n_bounds > (1u << 20)) throw CheckpointError("bad bounds count");
  for (std::uint64_t i = 0; i < n_bounds; ++i) {
    std::string name = binio::read_string(is);
    RunningBounds::Entry e;
    e.seen = binio::read_u8(is) != 0;
    e.min = binio::read_f64(is);
    e.max = binio::read_f64(is);
    bounds.entries()[name] = e;
  }
  BestSeen best;
  best.valid = binio::read_u8(is) != 0;
  best.objective = binio::read_f64(is);
  best.step = binio::read_u64(is);
  best.config.values = binio::read_f64_vec(is);
  double default_objective = binio::read_f64(is);
  StateVector last_state = binio::read_f64_vec(is);
  Configuration last_config(binio::read_f64_vec(is));
  return Checkpoint{std::move(agent),      std::move(buffer),     std::move(bounds),
                    std::move(best),       default_objective,     std::move(last_state),
                    std::move(last_config)};
}

}  // namespace knobtune

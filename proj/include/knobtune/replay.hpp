#pragma once

#include <cstddef>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>
#include <vector>

#include "knobtune/binio.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/objective.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

struct Transition {
  StateVector state;
  std::vector<double> action;  // unit-interval, as emitted by the agent
  double reward = 0.0;
  StateVector next_state;
};

// Bounded FIFO store. When full, pushing evicts the single oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<Transition>& entries() const { return entries_; }

  void push(Transition t) {
    entries_.push_back(std::move(t));
    if (entries_.size() > capacity_) entries_.pop_front();
  }

  // Uniform batch: without replacement when enough entries exist, with
  // replacement otherwise. Sampling never mutates the stored transitions.
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const {
    if (entries_.empty()) throw EmptyBufferError("cannot sample from empty replay buffer");
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    if (entries_.size() >= batch_size) {
      // Partial Fisher-Yates over the index range.
      std::vector<std::size_t> idx(entries_.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t i = 0; i < batch_size; ++i) {
        std::size_t j = i + uniform_index(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
        batch.push_back(entries_[idx[i]]);
      }
    } else {
      for (std::size_t i = 0; i < batch_size; ++i)
        batch.push_back(entries_[uniform_index(rng, entries_.size())]);
    }
    return batch;
  }

  void save(std::ostream& os) const {
    binio::write_u64(os, capacity_);
    binio::write_u64(os, entries_.size());
    for (const auto& t : entries_) {
      binio::write_f64_vec(os, t.state);
      binio::write_f64_vec(os, t.action);
      binio::write_f64(os, t.reward);
      binio::write_f64_vec(os, t.next_state);
    }
  }

  static ReplayBuffer load(std::istream& is) {
    std::uint64_t capacity = binio::read_u64(is);
    if (capacity == 0 || capacity > (1ull << 32)) throw CheckpointError("bad replay capacity");
    ReplayBuffer buf(capacity);
    std::uint64_t count = binio::read_u64(is);
    if (count > capacity) throw CheckpointError("replay entry count exceeds capacity");
    for (std::uint64_t i = 0; i < count; ++i) {
      Transition t;
      t.state = binio::read_f64_vec(is);
      t.action = binio::read_f64_vec(is);
      t.reward = binio::read_f64(is);
      t.next_state = binio::read_f64_vec(is);
      buf.entries_.push_back(std::move(t));
    }
    return buf;
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> entries_;
};

}  // namespace knobtune

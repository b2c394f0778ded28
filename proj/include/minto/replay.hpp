#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "minto/nn.hpp"
#include "minto/rng.hpp"

namespace minto::deep {

struct Batch {
  nn::Matrix obs;
  nn::Matrix next_obs;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;
  std::vector<std::size_t> indices;  // logical buffer indices (0 = oldest)

  std::size_t size() const { return actions.size(); }
};

/// FIFO ring of transitions with fixed-width observations. Sampling is
/// uniform with replacement.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t obs_dim);

  void push(std::span<const double> obs, int action, double reward, std::span<const double> next_obs, bool terminal);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t obs_dim() const { return obs_dim_; }

  /// Draws batch_size logical indices with batch_size calls to rng.uniform_int(size()).
  Batch sample(std::size_t batch_size, RngStream& rng) const;
  /// Gathers the given logical indices (0 = oldest stored transition).
  Batch gather(std::span<const std::size_t> indices) const;

  double reward_at(std::size_t logical) const { return rewards_[physical(logical)]; }
  int action_at(std::size_t logical) const { return actions_[physical(logical)]; }

 private:
  std::size_t physical(std::size_t logical) const;

  std::size_t capacity_;
  std::size_t obs_dim_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next physical slot to write
  std::vector<double> obs_;
  std::vector<double> next_obs_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> terminal_;
};

}  // namespace minto::deep

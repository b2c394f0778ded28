#include "minto/replay.hpp"

#include <algorithm>

#include "minto/error.hpp"

namespace minto::deep {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t obs_dim)
    : capacity_(capacity),
      obs_dim_(obs_dim),
      obs_(capacity * obs_dim),
      next_obs_(capacity * obs_dim),
      actions_(capacity),
      rewards_(capacity),
      terminal_(capacity) {
  require(capacity_ > 0, "ReplayBuffer: capacity must be positive");
  require(obs_dim_ > 0, "ReplayBuffer: observation width must be positive");
}

void ReplayBuffer::push(std::span<const double> obs, int action, double reward, std::span<const double> next_obs,
                        bool terminal) {
  require(obs.size() == obs_dim_ && next_obs.size() == obs_dim_, "ReplayBuffer: observation width mismatch");
  std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(head_ * obs_dim_));
  std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + static_cast<std::ptrdiff_t>(head_ * obs_dim_));
  actions_[head_] = action;
  rewards_[head_] = reward;
  terminal_[head_] = terminal ? 1 : 0;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::size_t ReplayBuffer::physical(std::size_t logical) const {
  require(logical < size_, "ReplayBuffer: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return (oldest + logical) % capacity_;
}

Batch ReplayBuffer::sample(std::size_t batch_size, RngStream& rng) const {
  require(size_ > 0, "ReplayBuffer: cannot sample from an empty buffer");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(size_));
  return gather(idx);
}

Batch ReplayBuffer::gather(std::span<const std::size_t> indices) const {
  Batch b;
  const std::size_t n = indices.size();
  b.obs.resize(n, obs_dim_);
  b.next_obs.resize(n, obs_dim_);
  b.actions.resize(n);
  b.rewards.resize(n);
  b.terminal.resize(n);
  b.indices.assign(indices.begin(), indices.end());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t p = physical(indices[r]);
    std::copy_n(obs_.begin() + static_cast<std::ptrdiff_t>(p * obs_dim_), obs_dim_, b.obs.row(r).begin());
    std::copy_n(next_obs_.begin() + static_cast<std::ptrdiff_t>(p * obs_dim_), obs_dim_, b.next_obs.row(r).begin());
    b.actions[r] = actions_[p];
    b.rewards[r] = rewards_[p];
    b.terminal[r] = terminal_[p];
  }
  return b;
}

}  // namespace minto::deep

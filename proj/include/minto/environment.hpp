#pragma once

#include <memory>
#include <span>

#include "minto/cartpole.hpp"
#include "minto/envs.hpp"
#include "minto/rng.hpp"

namespace minto::deep {

struct EnvFeedback {
  double reward = 0.0;
  bool terminal = false;
};

/// Observation-vector view of an environment for the replay-based trainers.
/// Episode length caps are enforced by the trainer, not here.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual int n_actions() const = 0;
  virtual int max_episode_steps() const = 0;
  virtual void reset(RngStream& rng, std::span<double> obs) = 0;
  virtual EnvFeedback step(int action, RngStream& rng, std::span<double> obs) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// Finite MDP exposed through one-hot state features.
class TabularEnvironment final : public Environment {
 public:
  TabularEnvironment(NoisyRewardMdp env, int max_episode_steps);
  TabularEnvironment(TabularMdp mdp, int max_episode_steps) : TabularEnvironment(NoisyRewardMdp{std::move(mdp), 0.0, {}}, max_episode_steps) {}

  int observation_size() const override { return env_.base.n_states(); }
  int n_actions() const override { return env_.base.n_actions(); }
  int max_episode_steps() const override { return max_steps_; }
  void reset(RngStream& rng, std::span<double> obs) override;
  EnvFeedback step(int action, RngStream& rng, std::span<double> obs) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularEnvironment>(*this); }

  const TabularMdp& mdp() const { return env_.base; }
  StateId state() const { return state_; }
  void encode(StateId s, std::span<double> obs) const;

 private:
  NoisyRewardMdp env_;
  int max_steps_;
  StateId state_ = 0;
};

/// Cart-pole with standardized 4-vector observations. Initial state entries
/// are uniform in [-0.05, 0.05].
class CartPoleEnvironment final : public Environment {
 public:
  explicit CartPoleEnvironment(CartPoleSpec spec = {}) : spec_(spec) {}

  int observation_size() const override { return 4; }
  int n_actions() const override { return 2; }
  int max_episode_steps() const override { return spec_.max_episode_steps; }
  void reset(RngStream& rng, std::span<double> obs) override;
  EnvFeedback step(int action, RngStream& rng, std::span<double> obs) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CartPoleEnvironment>(*this); }

  const CartPoleState& state() const { return state_; }

 private:
  CartPoleSpec spec_;
  CartPoleState state_{};
};

}  // namespace minto::deep

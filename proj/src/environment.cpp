#include "minto/environment.hpp"

#include <algorithm>

#include "minto/error.hpp"

namespace minto::deep {

TabularEnvironment::TabularEnvironment(NoisyRewardMdp env, int max_episode_steps)
    : env_(std::move(env)), max_steps_(max_episode_steps) {
  require(max_steps_ > 0, "TabularEnvironment: max_episode_steps must be positive");
}

void TabularEnvironment::encode(StateId s, std::span<double> obs) const {
  require(obs.size() == static_cast<std::size_t>(env_.base.n_states()), "TabularEnvironment: observation size");
  std::fill(obs.begin(), obs.end(), 0.0);
  obs[static_cast<std::size_t>(s)] = 1.0;
}

void TabularEnvironment::reset(RngStream& rng, std::span<double> obs) {
  state_ = minto::reset(env_.base, rng);
  encode(state_, obs);
}

EnvFeedback TabularEnvironment::step(int action, RngStream& rng, std::span<double> obs) {
  const Transition t = env_.step(state_, action, rng);
  state_ = t.next_state;
  encode(state_, obs);
  return {t.reward, t.terminal};
}

void CartPoleEnvironment::reset(RngStream& rng, std::span<double> obs) {
  for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  const auto f = cartpole_features(state_);
  std::copy(f.begin(), f.end(), obs.begin());
}

EnvFeedback CartPoleEnvironment::step(int action, RngStream& /*rng*/, std::span<double> obs) {
  const auto out = cartpole_step(spec_, state_, action);
  state_ = out.next;
  const auto f = cartpole_features(state_);
  std::copy(f.begin(), f.end(), obs.begin());
  return {out.reward, out.terminal};
}

}  // namespace minto::deep

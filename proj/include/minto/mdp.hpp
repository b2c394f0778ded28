#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "minto/rng.hpp"

namespace minto {

using StateId = int;
using ActionId = int;

struct Transition {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  StateId next_state = 0;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Dense action-value table, row-major over (state, action).
class QTable {
 public:
  QTable() = default;
  QTable(int n_states, int n_actions, double init = 0.0);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  double& at(StateId s, ActionId a) { return q_[index(s, a)]; }
  double at(StateId s, ActionId a) const { return q_[index(s, a)]; }

  std::span<double> row(StateId s) { return {q_.data() + index(s, 0), static_cast<std::size_t>(n_actions_)}; }
  std::span<const double> row(StateId s) const {
    return {q_.data() + index(s, 0), static_cast<std::size_t>(n_actions_)};
  }

  std::span<const double> values() const { return q_; }
  std::span<double> values() { return q_; }

  bool operator==(const QTable&) const = default;

 private:
  std::size_t index(StateId s, ActionId a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) + static_cast<std::size_t>(a);
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> q_;
};

/// Lowest-index argmax; ties always resolve to the smallest action id.
ActionId argmax(std::span<const double> values);
double max_value(std::span<const double> values);

/// Explicit finite MDP. Immutable once constructed; the constructor checks
/// stochasticity of every transition row and of the initial distribution.
class TabularMdp {
 public:
  /// transition is flat [s][a][s'], reward is flat [s][a].
  TabularMdp(int n_states, int n_actions, std::vector<double> transition, std::vector<double> reward,
             double gamma, std::vector<double> initial_dist, std::vector<bool> terminal);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }

  std::span<const double> transition_row(StateId s, ActionId a) const;
  double transition(StateId s, ActionId a, StateId next) const { return transition_row(s, a)[next]; }
  double reward(StateId s, ActionId a) const { return reward_[idx(s, a)]; }
  std::span<const double> initial_dist() const { return initial_dist_; }
  bool terminal(StateId s) const { return terminal_[s]; }

  std::span<const double> transition_data() const { return transition_; }
  std::span<const double> reward_data() const { return reward_; }

  /// Same model with one reward entry replaced.
  TabularMdp with_reward(StateId s, ActionId a, double value) const;
  /// Same model with another discount.
  TabularMdp with_gamma(double gamma) const;

  bool operator==(const TabularMdp&) const = default;

 private:
  std::size_t idx(StateId s, ActionId a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) + static_cast<std::size_t>(a);
  }

  int n_states_;
  int n_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  double gamma_;
  std::vector<double> initial_dist_;
  std::vector<bool> terminal_;
};

inline constexpr double kDefaultOracleTol = 1e-10;
inline constexpr long kMaxValueIterationSweeps = 1'000'000;

/// Synchronous (Jacobi) Bellman-optimality iteration. The returned table has
/// residual max|Q - TQ| <= tol. Successor terminal states carry no future value.
QTable value_iteration(const TabularMdp& mdp, double tol = kDefaultOracleTol);

/// One Bellman-optimality backup of q (used for residual checks).
QTable bellman_backup(const TabularMdp& mdp, const QTable& q);

/// Samples the successor of a non-terminal state. Stepping a terminal state throws.
Transition step(const TabularMdp& mdp, StateId state, ActionId action, RngStream& rng);

StateId reset(const TabularMdp& mdp, RngStream& rng);

void to_json(nlohmann::json& j, const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);

}  // namespace minto

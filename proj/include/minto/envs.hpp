#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "minto/mdp.hpp"
#include "minto/rng.hpp"

namespace minto {

// ---------------------------------------------------------------------------
// Gridworld

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

enum class GridAction : int { up = 0, down = 1, left = 2, right = 3 };

struct GridWorldSpec {
  int width = 5;
  int height = 5;
  std::set<Cell> walls;
  Cell goal{4, 4};
  /// Start cell; when empty the episode starts uniformly over non-goal cells.
  std::optional<Cell> start = Cell{0, 0};
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double slip_prob = 0.0;
  double gamma = 0.9;
};

struct GridWorld {
  TabularMdp mdp;
  /// cells[state] is the grid coordinate of that state; walls have no state.
  std::vector<Cell> cells;
  bool goal_reachable = true;
  std::vector<std::string> warnings;

  StateId state_of(Cell c) const;
};

/// Moves succeed with probability 1 - slip_prob and go in one of the other
/// three directions uniformly otherwise. Bumping into a wall or the border
/// leaves the agent in place. Entering the goal pays goal_reward and ends the
/// episode; the reward table stores the expected reward of each (s, a).
GridWorld build_gridworld(const GridWorldSpec& spec);

// ---------------------------------------------------------------------------
// Garnet

struct GarnetSpec {
  int n_states = 5;
  int n_actions = 2;
  int branching_factor = 2;
  double reward_sparsity = 1.0;
  std::uint64_t seed = 0;
  double gamma = 0.9;
};

/// Random MDP: every (s, a) has exactly branching_factor distinct successors
/// with flat-Dirichlet probabilities; a reward_sparsity fraction of (s, a)
/// pairs carry a nonzero reward with magnitude in (0, 1].
TabularMdp build_garnet(const GarnetSpec& spec);

// ---------------------------------------------------------------------------
// Noisy rewards

/// Adds zero-mean Gaussian noise to each emitted reward; the model's reward
/// table keeps the expectation.
struct NoisyRewardMdp {
  TabularMdp base;
  double noise_std = 0.0;
  /// States whose rewards are perturbed; empty means every state.
  std::vector<bool> noisy_states;

  Transition step(StateId state, ActionId action, RngStream& rng) const;
};

struct OverestimationSpec {
  int n_noisy_actions = 8;
  double noise_std = 1.0;
  double noisy_mean = 0.0;
  double gamma = 0.9;
  int chain_length = 1;
};

/// Probe state 0: action 1 moves (reward 0) to chain state 1, every other
/// action ends the episode with reward 0. Chain states 1..chain_length pay
/// noisy_mean + N(0, noise_std^2) for every action and move to the next chain
/// state; the last one moves to the terminal sink (state chain_length + 1).
NoisyRewardMdp build_overestimation_mdp(const OverestimationSpec& spec);

inline constexpr StateId kOverestimationProbe = 0;

// ---------------------------------------------------------------------------
// Offline datasets

struct BehaviorPolicy {
  double epsilon = 0.7;
  QTable q;  // greedy source
  std::string label = "eps_greedy";
};

struct OfflineDataset {
  std::vector<Transition> transitions;
  std::string behavior_policy_label;
  std::string env_fingerprint;

  bool operator==(const OfflineDataset&) const = default;
};

/// 64-bit FNV-1a over the MDP's canonical JSON, rendered as 16 hex digits.
std::string fingerprint(const TabularMdp& mdp);

/// Rolls out an epsilon-greedy policy around policy.q, restarting on
/// termination and after max_episode_steps.
OfflineDataset generate_offline_dataset(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                        std::size_t n_transitions, RngStream& rng,
                                        int max_episode_steps = 100);

/// Newline-delimited JSON: a header object then one {s, a, r, s', t} per line.
void write_dataset(const OfflineDataset& dataset, const std::filesystem::path& path);
OfflineDataset read_dataset(const std::filesystem::path& path);
/// Throws unless every transition indexes into mdp and the fingerprint matches.
void check_dataset(const OfflineDataset& dataset, const TabularMdp& mdp);

/// Visit counts per (state, action) of a dataset.
std::vector<std::size_t> coverage_counts(const OfflineDataset& dataset, int n_states, int n_actions);

// ---------------------------------------------------------------------------
// JSON config fragments

GridWorldSpec gridworld_spec_from_json(const nlohmann::json& j);
GarnetSpec garnet_spec_from_json(const nlohmann::json& j);
OverestimationSpec overestimation_spec_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const GridWorldSpec& spec);
void to_json(nlohmann::json& j, const GarnetSpec& spec);
void to_json(nlohmann::json& j, const OverestimationSpec& spec);

}  // namespace minto

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minto/combiners.hpp"
#include "minto/deep.hpp"
#include "minto/envs.hpp"
#include "minto/tabular.hpp"

namespace minto::studies {

// ---------------------------------------------------------------------------
// Operator conditions on random tensors

struct AppendixReport {
  long trials = 0;
  double max_nonexpansion_excess = 0.0;  // max of |G(Q) - G(Q')| - max|Q - Q'|, floored at 0
  long nonexpansion_violations = 0;         // trials with a positive excess beyond tolerance
  double max_identity_residual = 0.0;   // max |G(Q) - max_a Q(a)| for identical snapshot columns
};

AppendixReport appendix_a(long trials, std::uint64_t seed, TensorSampling sampling = {});

// ---------------------------------------------------------------------------
// Tabular convergence on Garnet MDPs

struct ConvergenceConfig {
  int garnets = 20;
  long total_steps = 5'000'000;
  double alpha0 = 1.0;
  double power = 0.7;
  double epsilon = 0.5;
  std::size_t ring_size = 4;
  long sync_period = 100;
  std::uint64_t visit_threshold = 100;
};

/// Garnet i of the sweep: 5..10 states, 2..4 actions, branching 2..3.
GarnetSpec convergence_garnet(int i);

struct ConvergenceRow {
  int garnet = 0;
  int n_states = 0;
  int n_actions = 0;
  std::string learner;
  double distance = 0.0;  // max-norm over entries visited >= threshold times
  std::uint64_t min_visits = 0;
};

/// Named tabular learners used by the sweep.
struct NamedTabularLearner {
  std::string name;
  TabularLearner learner;
};
std::vector<NamedTabularLearner> convergence_learners(const ConvergenceConfig& config, bool minto_only);

std::vector<ConvergenceRow> tabular_convergence(const ConvergenceConfig& config,
                                                const std::vector<NamedTabularLearner>& learners);

// ---------------------------------------------------------------------------
// Overestimation bias on the noisy chain

struct BiasConfig {
  int seeds = 30;
  OverestimationSpec env{4, 1.0, 0.0, 0.9, 10};
  int max_episode_steps = 50;
  int epochs = 10;
  long steps_per_epoch = 500;
  int bias_rollouts = 100;
  deep::TrainerConfig trainer = default_trainer();

  static deep::TrainerConfig default_trainer();
};

/// Per-seed bias averaged over epochs, for each combiner.
std::map<CombinerKind, std::vector<double>> bias_study(const BiasConfig& config,
                                                       const std::vector<CombinerKind>& combiners);

// ---------------------------------------------------------------------------
// Offline CQL on a partial-coverage gridworld

struct CqlConfig {
  int seeds = 10;
  GridWorldSpec grid = default_grid();
  int max_episode_steps = 50;
  std::size_t dataset_size = 250;
  double behavior_epsilon = 0.7;
  int dataset_episode_steps = 50;
  long gradient_steps = 10'000;
  deep::TrainerConfig trainer = default_trainer();

  static GridWorldSpec default_grid();
  static deep::TrainerConfig default_trainer();
};

struct CqlRun {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  CombinerKind combiner = CombinerKind::target_only;
  double mean_q_absent = 0.0;   // over non-terminal (s, a) absent from the dataset
  double mean_q_present = 0.0;
  std::size_t absent_pairs = 0;
  double max_loss = 0.0;
  double final_loss = 0.0;
  bool finite = true;
  double eval_return = 0.0;
};

CqlRun cql_run(const CqlConfig& config, std::uint64_t seed, double alpha, CombinerKind combiner);

// ---------------------------------------------------------------------------
// Online-selection ratio on the gridworld

struct SelectionConfig {
  int seeds = 10;
  GridWorldSpec grid = CqlConfig::default_grid();
  int max_episode_steps = 50;
  long env_steps = 40'000;
  deep::TrainerConfig trainer = default_trainer();

  static deep::TrainerConfig default_trainer();
};

struct SelectionResult {
  /// Ratio per sync interval averaged over seeds.
  std::vector<double> ratio;
  /// Ratio of the first batch after each sync, every seed (must all be 0).
  std::vector<double> first_after_sync;
};

SelectionResult selection_study(const SelectionConfig& config);

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);

// ---------------------------------------------------------------------------
// Desk-scale deep grids

/// Environments of the deep comparisons: the slip-0.1 gridworld and CartPole.
nlohmann::json desk_envs();
/// Shared trainer defaults for the deep comparisons.
nlohmann::json desk_learner(const std::string& kind);

}  // namespace minto::studies

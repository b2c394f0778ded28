#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "minto/combiners.hpp"
#include "minto/environment.hpp"
#include "minto/nn.hpp"
#include "minto/replay.hpp"

namespace minto::deep {

enum class LearnerKind { dqn_combiner, double_dqn, maxmin_dqn, fr_dqn, sc_dqn, cql };

std::string to_string(LearnerKind kind);
LearnerKind learner_from_string(const std::string& name);

/// Linear decay from start to end over duration environment steps.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  long duration = 10'000;

  double value(long env_step) const;
};

/// Desk-scale defaults. The Atari values (buffer 10^6, T = 8000, 20000
/// initial samples, 250000-step epsilon decay, lr 6.25e-5) are scaled down
/// while batch 32, gamma 0.99 and 4 environment steps per update are kept.
struct TrainerConfig {
  LearnerKind kind = LearnerKind::dqn_combiner;
  CombinerKind combiner = CombinerKind::min;
  RandomGranularity random_granularity = RandomGranularity::per_sample;
  double gamma = 0.99;
  int batch_size = 32;
  long target_period = 200;
  int data_to_update = 4;
  long initial_samples = 1000;
  EpsilonSchedule epsilon;
  std::size_t buffer_capacity = 100'000;
  double learning_rate = 1e-3;
  double adam_eps = 1e-8;
  std::vector<int> hidden = {64, 64};
  nn::Activation activation = nn::Activation::relu;
  bool huber = false;
  int ensemble_size = 2;    // maxmin_dqn (N)
  double kappa = 1.0;       // fr_dqn
  double beta = 3.0;        // sc_dqn
  double cql_alpha = 0.1;   // cql
  bool track_bias = false;
  int bias_rollouts = 100;

  /// Throws ContractError naming the first invalid field.
  void validate() const;
};

/// Per-sample bootstrap targets plus source attribution.
struct BatchTargetReport {
  std::vector<double> targets;
  std::vector<int> greedy_action;  // -1 for terminal samples
  /// 1 when the combined value at the greedy action came from the online
  /// network, 0 when from the target network, -1 for terminal samples.
  std::vector<std::int8_t> online_selected;
  bool attributable = false;

  std::size_t online_count() const;
  std::size_t attributed_count() const;
};

/// Bootstrapped targets for a batch. `targets` holds the frozen target
/// networks (one per ensemble member for maxmin_dqn, one otherwise).
/// Outputs are plain values; nothing links back into the online parameters.
BatchTargetReport compute_targets(const TrainerConfig& config, Combiner& combiner, const nn::Mlp& online,
                                  std::span<const nn::Mlp* const> targets, const Batch& batch);

/// kappa * mean_b (Q_online(s_b, a_b) - Q_target(s_b, a_b))^2 and its
/// gradient with respect to the online parameters only.
struct Penalty {
  double value = 0.0;
  std::vector<double> gradient;
};
Penalty fr_regularizer(const nn::Mlp& online, const nn::Mlp& target, const Batch& batch, double kappa);

/// alpha * (mean_b logsumexp_a Q(s_b, a) - mean_b Q(s_b, a_b)) and its gradient.
Penalty cql_regularizer(const nn::Mlp& online, const Batch& batch, double alpha);

/// Adds the FR penalty's output gradient into dout; returns the penalty.
double add_fr_penalty(const nn::Matrix& q_online, const nn::Matrix& q_target, std::span<const int> actions,
                      double kappa, nn::Matrix& dout);
/// Adds the CQL penalty's output gradient into dout; returns the penalty.
double add_cql_penalty(const nn::Matrix& q_online, std::span<const int> actions, double alpha, nn::Matrix& dout);

/// TD loss (1/2) mean_b (y_b - Q(s_b, a_b))^2, or mean Huber when huber is set,
/// with its output gradient written into dout.
double td_loss(const nn::Matrix& q_online, std::span<const int> actions, std::span<const double> targets,
               bool huber, nn::Matrix& dout);

/// One attributed batch: gradient-step index plus counts.
struct SelectionRecord {
  long update = 0;  // 0-based index of the gradient step that used the batch
  std::size_t online = 0;
  std::size_t total = 0;
};

/// Average online-selection ratio per sync interval [kT, (k+1)T).
std::vector<double> online_selection_ratio(std::span<const SelectionRecord> records, long sync_period);
/// Same, from raw reports (report i belongs to gradient step i). Throws when a
/// report is not attributable.
std::vector<double> online_selection_ratio(std::span<const BatchTargetReport> reports, long sync_period);

struct TrainStepResult {
  double loss = 0.0;          // total loss
  double td_loss = 0.0;
  double penalty = 0.0;       // FR or CQL term
  std::optional<double> selection_ratio;
};

struct EpochRow {
  int epoch = 0;
  long env_steps = 0;
  long gradient_steps = 0;
  double eval_return = 0.0;
  double loss_mean = 0.0;
  std::optional<double> online_selection_ratio;
  std::optional<double> bias_estimate;
  double wall_ms = 0.0;
};

/// Replay-driven value learner. Owns its environment, parameters, buffer and
/// RNG streams; nothing is shared with other trainers.
///
/// Per environment step the draw order is: exploration coin (and action when
/// exploring) from the exploration stream, environment transition from the
/// environment stream; when an update is due, batch indices from the buffer
/// stream, then combiner coins, then the ensemble member from the learner stream.
class Trainer {
 public:
  /// Online mode.
  Trainer(TrainerConfig config, std::unique_ptr<Environment> env, std::uint64_t seed);
  /// Offline mode: training batches come from `dataset` only; the environment
  /// is used for evaluation rollouts.
  Trainer(TrainerConfig config, std::unique_ptr<Environment> env, ReplayBuffer dataset, std::uint64_t seed);

  const TrainerConfig& config() const { return config_; }

  /// One environment interaction (online mode), followed by an update when due.
  /// Returns the update's result if one happened.
  std::optional<TrainStepResult> env_step();

  /// Samples a batch from the buffer and performs one gradient update.
  TrainStepResult update();
  /// Gradient update on a given batch (dqn_train_step / cql_train_step).
  TrainStepResult train_on_batch(const Batch& batch);

  /// Analytic gradient of the total loss at the current parameters for a
  /// batch, without changing any state (combiner coins are drawn from a copy).
  std::vector<double> loss_gradient(const Batch& batch, std::size_t member = 0) const;
  /// Loss of `params` on the batch with targets frozen at `frozen_targets`.
  double frozen_target_loss(const nn::Mlp& params, const Batch& batch, std::span<const double> frozen_targets,
                            std::size_t member = 0) const;

  /// Greedy action values used for acting (min over members for maxmin_dqn).
  std::vector<double> action_values(std::span<const double> obs) const;
  int greedy_action(std::span<const double> obs) const;

  /// Mean undiscounted return of the greedy policy.
  double evaluate(int episodes, RngStream& rng) const;
  /// Mean over initial states of max_a Q(s0, a) minus the Monte-Carlo
  /// discounted return of the greedy policy from those states.
  double bias_estimate(int rollouts, RngStream& rng) const;

  /// Runs epochs of steps_per_epoch environment steps (gradient steps in
  /// offline mode), evaluating after each.
  std::vector<EpochRow> run(int epochs, long steps_per_epoch, int eval_episodes);

  const nn::Mlp& online(std::size_t member = 0) const { return online_.at(member); }
  nn::Mlp& mutable_online(std::size_t member = 0) { return online_.at(member); }
  const nn::TargetParams& target(std::size_t member = 0) const { return target_.at(member); }
  std::size_t ensemble_size() const { return online_.size(); }
  long env_steps() const { return env_steps_; }
  long gradient_steps() const { return updates_; }
  long sync_count() const { return syncs_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<SelectionRecord>& selection_records() const { return selections_; }
  const std::vector<double>& loss_trace() const { return losses_; }
  bool offline() const { return offline_; }
  Environment& environment() { return *env_; }

 private:
  void init_networks();
  std::vector<const nn::Mlp*> target_ptrs() const;

  TrainerConfig config_;
  std::unique_ptr<Environment> env_;
  bool offline_ = false;
  std::uint64_t seed_;
  RngStream env_rng_;
  RngStream explore_rng_;
  RngStream buffer_rng_;
  RngStream learner_rng_;
  Combiner combiner_;
  ReplayBuffer buffer_;
  std::vector<nn::Mlp> online_;
  std::vector<nn::TargetParams> target_;
  std::vector<nn::AdamState> adam_;
  std::vector<double> obs_;
  std::vector<double> next_obs_;
  int episode_t_ = 0;
  long env_steps_ = 0;
  long updates_ = 0;
  long syncs_ = 0;
  std::vector<SelectionRecord> selections_;
  std::vector<double> losses_;
};

/// Evaluation rollout helper shared by the trainer and the metrics anchors:
/// mean undiscounted return of `policy` over episodes.
template <typename Policy>
double rollout_return(Environment& env, const Policy& policy, int episodes, RngStream& rng) {
  std::vector<double> obs(static_cast<std::size_t>(env.observation_size()));
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng, obs);
    for (int t = 0; t < env.max_episode_steps(); ++t) {
      const auto fb = env.step(policy(std::span<const double>(obs), rng), rng, obs);
      total += fb.reward;
      if (fb.terminal) break;
    }
  }
  return total / episodes;
}

}  // namespace minto::deep

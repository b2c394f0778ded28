#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "minto/combiners.hpp"
#include "minto/envs.hpp"
#include "minto/mdp.hpp"
#include "minto/rng.hpp"

namespace minto {

/// alpha(s, a) = alpha0 for the constant form, alpha0 / n(s, a)^power for the
/// polynomial form, where n counts updates of (s, a) including the current one.
class StepSizeSchedule {
 public:
  enum class Form { constant, polynomial };

  static StepSizeSchedule constant(double alpha);
  static StepSizeSchedule polynomial(double alpha0, double power);

  Form form() const { return form_; }
  double alpha0() const { return alpha0_; }
  double power() const { return power_; }

  /// Sum alpha = inf and sum alpha^2 < inf.
  bool robbins_monro() const { return form_ == Form::polynomial && power_ > 0.5 && power_ <= 1.0; }

  double alpha(std::uint64_t visit_count) const;

 private:
  StepSizeSchedule(Form form, double alpha0, double power);
  Form form_;
  double alpha0_;
  double power_;
};

/// Historical copies of the online table, taken every sync_period updates.
/// At most capacity snapshots are kept; the oldest plays the target-network role.
class SnapshotRing {
 public:
  SnapshotRing(std::size_t capacity, long sync_period, const QTable& initial);

  /// Call once per online update with the post-update table.
  void on_update(const QTable& online);

  const QTable& oldest() const { return snapshots_.front().table; }
  std::size_t size() const { return snapshots_.size(); }
  std::size_t capacity() const { return capacity_; }
  long sync_period() const { return sync_period_; }
  long updates() const { return updates_; }
  const QTable& snapshot(std::size_t i) const { return snapshots_.at(i).table; }
  long label(std::size_t i) const { return snapshots_.at(i).time; }

 private:
  struct Entry {
    long time;
    QTable table;
  };
  std::size_t capacity_;
  long sync_period_;
  long updates_ = 0;
  std::deque<Entry> snapshots_;
};

/// Snapshot indices entering the min: {t-1, t-K} uses the online table and the
/// oldest retained snapshot; full_ring uses the online table and every snapshot.
enum class SnapshotSet { latest_and_oldest, full_ring };

/// q[s][a] += alpha * (target - q[s][a]). Throws on NaN target or alpha outside (0, 1].
void q_update(QTable& q, const Transition& tr, double alpha, double target_value);

/// r + gamma * max_a' min(Q_old(s', a'), Q_online(s', a')), or r when terminal.
double minto_tabular_target(const Transition& tr, const SnapshotRing& ring, const QTable& online, double gamma,
                            SnapshotSet set = SnapshotSet::latest_and_oldest);

enum class TabularLearnerKind { q_learning, double_q, maxmin_q, minto };

struct TabularLearner {
  TabularLearnerKind kind = TabularLearnerKind::q_learning;
  int ensemble_size = 2;  // maxmin_q
  // minto: combiner applied between the oldest snapshot and the online table.
  // Min is MINTO proper; other variants give the tabular operator ablation.
  CombinerKind combiner = CombinerKind::min;
  SnapshotSet snapshot_set = SnapshotSet::latest_and_oldest;
  std::size_t ring_size = 1;
  long sync_period = 100;
};

std::string to_string(TabularLearnerKind kind);
TabularLearnerKind tabular_learner_from_string(const std::string& name);

struct TabularRunConfig {
  TabularLearner learner;
  StepSizeSchedule schedule = StepSizeSchedule::polynomial(1.0, 0.8);
  double epsilon = 0.1;
  long total_steps = 100'000;
  int max_episode_steps = 100;
  std::uint64_t seed = 0;
  /// Optional oracle for distance tracking.
  std::optional<QTable> oracle;
  /// Visit threshold for the "visited" distance column.
  std::uint64_t visit_threshold = 100;
};

struct TabularEpisodeRow {
  long episode = 0;
  long steps = 0;           // cumulative environment steps at episode end
  double episode_return = 0.0;
  double td_loss = 0.0;     // mean squared TD error over the episode
  double dist_all = 0.0;    // max |Q - Q*| over all entries
  double dist_visited = 0.0;  // over entries with visits >= visit_threshold
};

struct TabularRunResult {
  /// The learner's value estimate: Q for q_learning/minto, (A+B)/2 for
  /// double_q, elementwise min over members for maxmin_q.
  QTable estimate;
  std::vector<QTable> tables;  // raw learner tables
  std::vector<std::uint64_t> visits;  // per (s, a) environment visits
  std::vector<TabularEpisodeRow> rows;
};

/// Epsilon-greedy interaction with the configured update rule.
TabularRunResult run_tabular(const NoisyRewardMdp& env, const TabularRunConfig& config);
TabularRunResult run_tabular(const TabularMdp& mdp, const TabularRunConfig& config);

/// max |a - b| over entries with visits >= threshold (all entries when visits is empty).
double max_norm_distance(const QTable& a, const QTable& b, const std::vector<std::uint64_t>& visits = {},
                         std::uint64_t threshold = 0);

}  // namespace minto

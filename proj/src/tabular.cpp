#include "minto/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minto/error.hpp"

namespace minto {

StepSizeSchedule::StepSizeSchedule(Form form, double alpha0, double power)
    : form_(form), alpha0_(alpha0), power_(power) {
  require(alpha0 > 0.0 && alpha0 <= 1.0, "step size: alpha0 must lie in (0, 1]");
  require(power >= 0.0, "step size: power must be >= 0");
}

StepSizeSchedule StepSizeSchedule::constant(double alpha) { return {Form::constant, alpha, 0.0}; }

StepSizeSchedule StepSizeSchedule::polynomial(double alpha0, double power) {
  return {Form::polynomial, alpha0, power};
}

double StepSizeSchedule::alpha(std::uint64_t visit_count) const {
  if (form_ == Form::constant) return alpha0_;
  const double n = static_cast<double>(std::max<std::uint64_t>(visit_count, 1));
  return alpha0_ / std::pow(n, power_);
}

SnapshotRing::SnapshotRing(std::size_t capacity, long sync_period, const QTable& initial)
    : capacity_(capacity), sync_period_(sync_period) {
  require(capacity_ >= 1, "SnapshotRing: capacity must be >= 1");
  require(sync_period_ >= 1, "SnapshotRing: sync_period must be >= 1");
  snapshots_.push_back({0, initial});
}

void SnapshotRing::on_update(const QTable& online) {
  ++updates_;
  if (updates_ % sync_period_ != 0) return;
  snapshots_.push_back({updates_, online});
  while (snapshots_.size() > capacity_) snapshots_.pop_front();
}

void q_update(QTable& q, const Transition& tr, double alpha, double target_value) {
  if (std::isnan(target_value)) throw NumericError("q_update: NaN target");
  require(alpha > 0.0 && alpha <= 1.0, "q_update: alpha must lie in (0, 1]");
  double& entry = q.at(tr.state, tr.action);
  entry += alpha * (target_value - entry);
}

double minto_tabular_target(const Transition& tr, const SnapshotRing& ring, const QTable& online, double gamma,
                            SnapshotSet set) {
  if (tr.terminal) return tr.reward;
  const auto live = online.row(tr.next_state);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < live.size(); ++a) {
    double lowest = live[a];
    if (set == SnapshotSet::latest_and_oldest) {
      lowest = std::min(lowest, ring.oldest().row(tr.next_state)[a]);
    } else {
      for (std::size_t j = 0; j < ring.size(); ++j) lowest = std::min(lowest, ring.snapshot(j).row(tr.next_state)[a]);
    }
    best = std::max(best, lowest);
  }
  return tr.reward + gamma * best;
}

std::string to_string(TabularLearnerKind kind) {
  switch (kind) {
    case TabularLearnerKind::q_learning: return "q_learning";
    case TabularLearnerKind::double_q: return "double_q";
    case TabularLearnerKind::maxmin_q: return "maxmin_q";
    case TabularLearnerKind::minto: return "minto";
  }
  return "?";
}

TabularLearnerKind tabular_learner_from_string(const std::string& name) {
  for (auto k : {TabularLearnerKind::q_learning, TabularLearnerKind::double_q, TabularLearnerKind::maxmin_q,
                 TabularLearnerKind::minto}) {
    if (to_string(k) == name) return k;
  }
  throw ContractError("unknown tabular learner '" + name + "'");
}

double max_norm_distance(const QTable& a, const QTable& b, const std::vector<std::uint64_t>& visits,
                         std::uint64_t threshold) {
  require(a.n_states() == b.n_states() && a.n_actions() == b.n_actions(), "max_norm_distance: shape mismatch");
  const auto va = a.values();
  const auto vb = b.values();
  double d = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (!visits.empty() && visits[i] < threshold) continue;
    d = std::max(d, std::abs(va[i] - vb[i]));
  }
  return d;
}

namespace {

class TabularAgent {
 public:
  TabularAgent(const TabularMdp& mdp, const TabularRunConfig& config)
      : mdp_(mdp),
        config_(config),
        learner_(config.learner),
        learner_rng_(config.seed, StreamId::learner),
        combiner_(learner_.combiner, learner_.combiner == CombinerKind::random
                                          ? std::optional<RngStream>(RngStream(config.seed, StreamId::combiner))
                                          : std::nullopt) {
    const int ns = mdp.n_states();
    const int na = mdp.n_actions();
    std::size_t n_tables = 1;
    if (learner_.kind == TabularLearnerKind::double_q) n_tables = 2;
    if (learner_.kind == TabularLearnerKind::maxmin_q) {
      require(learner_.ensemble_size >= 1, "maxmin_q: ensemble_size must be >= 1");
      n_tables = static_cast<std::size_t>(learner_.ensemble_size);
    }
    tables_.assign(n_tables, QTable(ns, na));
    counts_.assign(n_tables, std::vector<std::uint64_t>(static_cast<std::size_t>(ns) * na, 0));
    if (learner_.kind == TabularLearnerKind::minto) {
      require(learner_.snapshot_set == SnapshotSet::latest_and_oldest || learner_.combiner == CombinerKind::min,
              "minto: the full snapshot ring is defined for the min combiner only");
      ring_.emplace(learner_.ring_size, learner_.sync_period, tables_[0]);
    }
    scratch_.resize(static_cast<std::size_t>(na));
  }

  /// Greedy values used for behaviour and evaluation.
  void behaviour_values(StateId s, std::span<double> out) const {
    const auto na = out.size();
    switch (learner_.kind) {
      case TabularLearnerKind::q_learning:
      case TabularLearnerKind::minto:
        std::copy_n(tables_[0].row(s).begin(), na, out.begin());
        break;
      case TabularLearnerKind::double_q:
        for (std::size_t a = 0; a < na; ++a) out[a] = tables_[0].row(s)[a] + tables_[1].row(s)[a];
        break;
      case TabularLearnerKind::maxmin_q:
        for (std::size_t a = 0; a < na; ++a) {
          double v = tables_[0].row(s)[a];
          for (std::size_t i = 1; i < tables_.size(); ++i) v = std::min(v, tables_[i].row(s)[a]);
          out[a] = v;
        }
        break;
    }
  }

  /// Applies one update and returns the squared TD error.
  double update(const Transition& tr) {
    const double gamma = mdp_.gamma();
    const auto sa = static_cast<std::size_t>(tr.state) * static_cast<std::size_t>(mdp_.n_actions()) + tr.action;
    std::size_t member = 0;
    double target = tr.reward;
    switch (learner_.kind) {
      case TabularLearnerKind::q_learning:
        if (!tr.terminal) target += gamma * max_value(tables_[0].row(tr.next_state));
        break;
      case TabularLearnerKind::double_q: {
        member = learner_rng_.bernoulli(0.5) ? 1 : 0;
        if (!tr.terminal) {
          const ActionId best = argmax(tables_[member].row(tr.next_state));
          target += gamma * tables_[1 - member].at(tr.next_state, best);
        }
        break;
      }
      case TabularLearnerKind::maxmin_q: {
        member = static_cast<std::size_t>(learner_rng_.uniform_int(tables_.size()));
        if (!tr.terminal) {
          behaviour_values(tr.next_state, scratch_);
          target += gamma * max_value(scratch_);
        }
        break;
      }
      case TabularLearnerKind::minto:
        if (learner_.combiner == CombinerKind::min) {
          target = minto_tabular_target(tr, *ring_, tables_[0], gamma, learner_.snapshot_set);
        } else if (!tr.terminal) {
          combiner_.combine_into(ring_->oldest().row(tr.next_state), tables_[0].row(tr.next_state), scratch_);
          target += gamma * max_value(scratch_);
        }
        break;
    }
    QTable& q = tables_[member];
    const double td = target - q.at(tr.state, tr.action);
    const double alpha = config_.schedule.alpha(++counts_[member][sa]);
    q_update(q, tr, alpha, target);
    if (ring_) ring_->on_update(tables_[0]);
    return td * td;
  }

  QTable estimate() const {
    QTable out(mdp_.n_states(), mdp_.n_actions());
    for (StateId s = 0; s < mdp_.n_states(); ++s) {
      std::vector<double> row(static_cast<std::size_t>(mdp_.n_actions()));
      behaviour_values(s, row);
      if (learner_.kind == TabularLearnerKind::double_q) {
        for (auto& v : row) v *= 0.5;
      }
      std::copy(row.begin(), row.end(), out.row(s).begin());
    }
    return out;
  }

  const std::vector<QTable>& tables() const { return tables_; }

 private:
  const TabularMdp& mdp_;
  const TabularRunConfig& config_;
  TabularLearner learner_;
  RngStream learner_rng_;
  Combiner combiner_;
  std::vector<QTable> tables_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::optional<SnapshotRing> ring_;
  std::vector<double> scratch_;
};

}  // namespace

TabularRunResult run_tabular(const NoisyRewardMdp& env, const TabularRunConfig& config) {
  require(config.total_steps > 0, "run_tabular: total_steps must be positive");
  require(config.epsilon >= 0.0 && config.epsilon <= 1.0, "run_tabular: epsilon must lie in [0, 1]");
  require(config.max_episode_steps > 0, "run_tabular: max_episode_steps must be positive");
  const TabularMdp& mdp = env.base;
  if (config.oracle) {
    require(config.oracle->n_states() == mdp.n_states() && config.oracle->n_actions() == mdp.n_actions(),
            "run_tabular: oracle shape mismatch");
  }
  TabularAgent agent(mdp, config);
  RngStream env_rng(config.seed, StreamId::environment);
  RngStream explore_rng(config.seed, StreamId::exploration);

  TabularRunResult result;
  result.visits.assign(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions(), 0);
  std::vector<double> values(static_cast<std::size_t>(mdp.n_actions()));

  long steps = 0;
  long episode = 0;
  while (steps < config.total_steps) {
    StateId s = reset(mdp, env_rng);
    double ret = 0.0;
    double loss = 0.0;
    int t = 0;
    while (t < config.max_episode_steps && steps < config.total_steps) {
      ActionId a;
      if (explore_rng.uniform() < config.epsilon) {
        a = static_cast<ActionId>(explore_rng.uniform_int(static_cast<std::uint64_t>(mdp.n_actions())));
      } else {
        agent.behaviour_values(s, values);
        a = argmax(values);
      }
      const Transition tr = env.step(s, a, env_rng);
      ++result.visits[static_cast<std::size_t>(s) * mdp.n_actions() + a];
      loss += agent.update(tr);
      ret += tr.reward;
      ++t;
      ++steps;
      if (tr.terminal) break;
      s = tr.next_state;
    }
    TabularEpisodeRow row;
    row.episode = episode++;
    row.steps = steps;
    row.episode_return = ret;
    row.td_loss = t > 0 ? loss / t : 0.0;
    if (config.oracle) {
      const QTable est = agent.estimate();
      row.dist_all = max_norm_distance(est, *config.oracle);
      row.dist_visited = max_norm_distance(est, *config.oracle, result.visits, config.visit_threshold);
    }
    result.rows.push_back(row);
  }
  result.estimate = agent.estimate();
  result.tables = agent.tables();
  return result;
}

TabularRunResult run_tabular(const TabularMdp& mdp, const TabularRunConfig& config) {
  return run_tabular(NoisyRewardMdp{mdp, 0.0, {}}, config);
}

}  // namespace minto

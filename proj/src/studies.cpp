#include "minto/studies.hpp"

#include <algorithm>
#include <cmath>

#include "minto/error.hpp"
#include "minto/metrics.hpp"
#include "minto/runner.hpp"

namespace minto::studies {

AppendixReport appendix_a(long trials, std::uint64_t seed, TensorSampling sampling) {
  require(trials > 0, "appendix_a: trials must be positive");
  RngStream rng_ne(seed, StreamId::property, 12);
  RngStream rng_id(seed, StreamId::property, 11);
  const TensorOperator op = [](const QTensor& q) { return g_minto(q); };
  const auto ne = check_non_expansion(op, static_cast<std::size_t>(trials), rng_ne, sampling);
  AppendixReport r;
  r.trials = trials;
  r.max_nonexpansion_excess = std::max(0.0, ne.max_violation);
  r.nonexpansion_violations = static_cast<long>(ne.violations);
  r.max_identity_residual = check_identical_inputs(op, static_cast<std::size_t>(trials), rng_id, sampling);
  return r;
}

// ---------------------------------------------------------------------------

GarnetSpec convergence_garnet(int i) {
  GarnetSpec g;
  g.seed = static_cast<std::uint64_t>(i);
  g.n_states = 5 + i % 6;
  g.n_actions = 2 + i % 3;
  g.branching_factor = 2 + i % 2;
  return g;
}

std::vector<NamedTabularLearner> convergence_learners(const ConvergenceConfig& config, bool minto_only) {
  std::vector<NamedTabularLearner> out;
  TabularLearner m;
  m.kind = TabularLearnerKind::minto;
  m.ring_size = config.ring_size;
  m.sync_period = config.sync_period;
  m.snapshot_set = SnapshotSet::latest_and_oldest;
  out.push_back({"minto_latest_oldest", m});
  m.snapshot_set = SnapshotSet::full_ring;
  out.push_back({"minto_full_ring", m});
  if (minto_only) return out;
  TabularLearner q;
  q.kind = TabularLearnerKind::q_learning;
  out.insert(out.begin(), {"q_learning", q});
  TabularLearner d;
  d.kind = TabularLearnerKind::double_q;
  out.insert(out.begin() + 1, {"double_q", d});
  TabularLearner mm;
  mm.kind = TabularLearnerKind::maxmin_q;
  mm.ensemble_size = 2;
  out.insert(out.begin() + 2, {"maxmin_q", mm});
  return out;
}

std::vector<ConvergenceRow> tabular_convergence(const ConvergenceConfig& config,
                                                const std::vector<NamedTabularLearner>& learners) {
  std::vector<ConvergenceRow> rows;
  for (int g = 0; g < config.garnets; ++g) {
    const GarnetSpec spec = convergence_garnet(g);
    const TabularMdp mdp = build_garnet(spec);
    const QTable q_star = value_iteration(mdp);
    for (const auto& l : learners) {
      TabularRunConfig c;
      c.learner = l.learner;
      c.schedule = StepSizeSchedule::polynomial(config.alpha0, config.power);
      c.epsilon = config.epsilon;
      c.total_steps = config.total_steps;
      c.seed = static_cast<std::uint64_t>(g);
      c.visit_threshold = config.visit_threshold;
      const auto result = run_tabular(mdp, c);
      ConvergenceRow row;
      row.garnet = g;
      row.n_states = spec.n_states;
      row.n_actions = spec.n_actions;
      row.learner = l.name;
      row.distance = max_norm_distance(result.estimate, q_star, result.visits, config.visit_threshold);
      row.min_visits = *std::min_element(result.visits.begin(), result.visits.end());
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

deep::TrainerConfig BiasConfig::default_trainer() {
  deep::TrainerConfig c;
  c.hidden = {32, 32};
  c.target_period = 200;
  c.learning_rate = 1e-3;
  c.initial_samples = 100;
  c.epsilon.duration = 1000;
  c.track_bias = true;
  return c;
}

std::map<CombinerKind, std::vector<double>> bias_study(const BiasConfig& config,
                                                       const std::vector<CombinerKind>& combiners) {
  std::map<CombinerKind, std::vector<double>> out;
  const NoisyRewardMdp env = build_overestimation_mdp(config.env);
  for (auto kind : combiners) {
    auto& per_seed = out[kind];
    for (int s = 0; s < config.seeds; ++s) {
      deep::TrainerConfig c = config.trainer;
      c.kind = deep::LearnerKind::dqn_combiner;
      c.combiner = kind;
      c.track_bias = true;
      c.bias_rollouts = config.bias_rollouts;
      deep::Trainer trainer(c, std::make_unique<deep::TabularEnvironment>(env, config.max_episode_steps),
                            static_cast<std::uint64_t>(s));
      const auto rows = trainer.run(config.epochs, config.steps_per_epoch, 1);
      double sum = 0.0;
      for (const auto& r : rows) sum += r.bias_estimate.value();
      per_seed.push_back(sum / static_cast<double>(rows.size()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

GridWorldSpec CqlConfig::default_grid() {
  GridWorldSpec g;
  g.width = 5;
  g.height = 5;
  g.walls = {{2, 1}, {2, 2}, {2, 3}};
  g.goal = {4, 4};
  g.start = Cell{0, 0};
  g.slip_prob = 0.1;
  return g;
}

deep::TrainerConfig CqlConfig::default_trainer() {
  deep::TrainerConfig c;
  c.kind = deep::LearnerKind::cql;
  c.combiner = CombinerKind::target_only;
  return c;
}

CqlRun cql_run(const CqlConfig& config, std::uint64_t seed, double alpha, CombinerKind combiner) {
  const GridWorld grid = build_gridworld(config.grid);
  deep::TabularEnvironment env(grid.mdp, config.max_episode_steps);
  runner::OfflineSpec spec;
  spec.size = config.dataset_size;
  spec.behavior_epsilon = config.behavior_epsilon;
  spec.max_episode_steps = config.dataset_episode_steps;
  const OfflineDataset dataset = runner::make_offline_dataset(env, spec, seed);
  const int ns = grid.mdp.n_states();
  const int na = grid.mdp.n_actions();
  const auto counts = coverage_counts(dataset, ns, na);

  deep::TrainerConfig c = config.trainer;
  c.kind = deep::LearnerKind::cql;
  c.cql_alpha = alpha;
  c.combiner = combiner;
  deep::Trainer trainer(c, std::make_unique<deep::TabularEnvironment>(env), runner::dataset_to_buffer(dataset, env), seed);

  CqlRun run;
  run.seed = seed;
  run.alpha = alpha;
  run.combiner = combiner;
  try {
    for (long k = 0; k < config.gradient_steps; ++k) {
      const auto step = trainer.update();
      run.max_loss = std::max(run.max_loss, step.loss);
      run.final_loss = step.loss;
    }
  } catch (const NumericError&) {
    run.finite = false;
    return run;
  }
  std::vector<double> obs(static_cast<std::size_t>(ns));
  double absent = 0.0;
  double present = 0.0;
  std::size_t n_present = 0;
  for (StateId s = 0; s < ns; ++s) {
    if (grid.mdp.terminal(s)) continue;
    env.encode(s, obs);
    const auto q = trainer.action_values(obs);
    for (int a = 0; a < na; ++a) {
      if (!std::isfinite(q[a])) run.finite = false;
      if (counts[static_cast<std::size_t>(s) * na + a] == 0) {
        absent += q[a];
        ++run.absent_pairs;
      } else {
        present += q[a];
        ++n_present;
      }
    }
  }
  run.mean_q_absent = run.absent_pairs ? absent / static_cast<double>(run.absent_pairs) : 0.0;
  run.mean_q_present = n_present ? present / static_cast<double>(n_present) : 0.0;
  RngStream eval(seed, StreamId::evaluation, 1);
  run.eval_return = trainer.evaluate(20, eval);
  return run;
}

// ---------------------------------------------------------------------------

deep::TrainerConfig SelectionConfig::default_trainer() {
  deep::TrainerConfig c;
  c.kind = deep::LearnerKind::dqn_combiner;
  c.combiner = CombinerKind::min;
  c.learning_rate = 6.25e-5;
  c.epsilon.duration = 10'000;
  return c;
}

SelectionResult selection_study(const SelectionConfig& config) {
  require(config.seeds > 0, "selection_study: seeds must be positive");
  const GridWorld grid = build_gridworld(config.grid);
  SelectionResult out;
  std::vector<double> sum;
  std::vector<int> count;
  for (int s = 0; s < config.seeds; ++s) {
    deep::Trainer trainer(config.trainer, std::make_unique<deep::TabularEnvironment>(grid.mdp, config.max_episode_steps),
                          static_cast<std::uint64_t>(s));
    for (long k = 0; k < config.env_steps; ++k) trainer.env_step();
    const auto& records = trainer.selection_records();
    const auto ratio = deep::online_selection_ratio(records, config.trainer.target_period);
    if (sum.size() < ratio.size()) {
      sum.resize(ratio.size(), 0.0);
      count.resize(ratio.size(), 0);
    }
    for (std::size_t k = 0; k < ratio.size(); ++k) {
      sum[k] += ratio[k];
      ++count[k];
    }
    for (const auto& r : records) {
      if (r.update % config.trainer.target_period == 0) {
        out.first_after_sync.push_back(r.total ? static_cast<double>(r.online) / static_cast<double>(r.total) : 0.0);
      }
    }
  }
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (count[k] == config.seeds) out.ratio.push_back(sum[k] / count[k]);
  }
  return out;
}

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
  require(window > 0, "moving_average: window must be positive");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= window) acc -= xs[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json desk_envs() {
  nlohmann::json grid;
  to_json(grid, CqlConfig::default_grid());
  grid["name"] = "gridworld";
  grid["max_episode_steps"] = 50;
  return nlohmann::json::array({grid, {{"type", "cartpole"}, {"name", "cartpole"}, {"max_episode_steps", 500}}});
}

nlohmann::json desk_learner(const std::string& kind) {
  return {{"kind", kind}, {"initial_samples", 1000}, {"epsilon_decay_steps", 10000}};
}

}  // namespace minto::studies

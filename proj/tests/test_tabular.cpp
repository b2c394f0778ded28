#include <doctest.h>

#include <cmath>

#include "minto/envs.hpp"
#include "minto/error.hpp"
#include "minto/tabular.hpp"

using namespace minto;

TEST_CASE("q_update arithmetic") {
  QTable q(2, 2);
  const Transition tr{0, 1, 1.0, 1, false};
  q_update(q, tr, 1.0, 4.0);
  CHECK(q.at(0, 1) == 4.0);
  q_update(q, tr, 0.3, 4.0);
  CHECK(q.at(0, 1) == 4.0);

  QTable z(2, 2);
  // r = 1, gamma = 0.9, next-state values [0, 0]
  const double target = 1.0 + 0.9 * max_value(z.row(1));
  q_update(z, tr, 0.5, target);
  CHECK(z.at(0, 1) == 0.5);

  CHECK_THROWS_AS(q_update(z, tr, 0.0, 1.0), ContractError);
  CHECK_THROWS_AS(q_update(z, tr, 1.5, 1.0), ContractError);
  CHECK_THROWS_AS(q_update(z, tr, 0.5, NAN), NumericError);
}

TEST_CASE("step-size schedules") {
  CHECK(StepSizeSchedule::polynomial(1.0, 0.8).robbins_monro());
  CHECK_FALSE(StepSizeSchedule::polynomial(1.0, 0.5).robbins_monro());
  CHECK_FALSE(StepSizeSchedule::constant(0.1).robbins_monro());
  CHECK(StepSizeSchedule::polynomial(0.5, 1.0).alpha(4) == 0.125);
  CHECK(StepSizeSchedule::constant(0.1).alpha(1000) == 0.1);
  CHECK_THROWS_AS(StepSizeSchedule::constant(0.0), ContractError);
}

TEST_CASE("minto tabular target") {
  QTable snap(2, 2);
  snap.at(1, 0) = 1.0;
  snap.at(1, 1) = 3.0;
  QTable online(2, 2);
  online.at(1, 0) = 2.0;
  online.at(1, 1) = 2.5;
  const SnapshotRing ring(1, 100, snap);
  CHECK(minto_tabular_target({0, 0, 1.0, 1, false}, ring, online, 0.9) == doctest::Approx(3.25));
  CHECK(minto_tabular_target({0, 0, 2.0, 1, true}, ring, online, 0.9) == 2.0);
}

TEST_CASE("snapshot ring keeps the newest copies") {
  QTable q(1, 1);
  SnapshotRing ring(3, 2, q);
  for (int i = 1; i <= 10; ++i) {
    q.at(0, 0) = i;
    ring.on_update(q);
  }
  CHECK(ring.size() == 3);
  CHECK(ring.label(0) == 6);
  CHECK(ring.oldest().at(0, 0) == 6.0);
  CHECK(ring.snapshot(2).at(0, 0) == 10.0);

  QTable full_snap(2, 1);
  full_snap.at(1, 0) = 5.0;
  SnapshotRing two(2, 1, full_snap);
  QTable mid(2, 1);
  mid.at(1, 0) = -1.0;
  two.on_update(mid);
  QTable online(2, 1);
  online.at(1, 0) = 3.0;
  CHECK(two.size() == 2);
  const Transition tr{0, 0, 0.0, 1, false};
  CHECK(minto_tabular_target(tr, two, online, 1.0 - 1e-9, SnapshotSet::latest_and_oldest) ==
        doctest::Approx(3.0));
  CHECK(minto_tabular_target(tr, two, online, 1.0 - 1e-9, SnapshotSet::full_ring) == doctest::Approx(-1.0));
}

TEST_CASE("myopic garnet converges to the reward table") {
  GarnetSpec spec;
  spec.gamma = 0.0;
  spec.seed = 3;
  const TabularMdp mdp = build_garnet(spec);
  for (auto kind : {TabularLearnerKind::q_learning, TabularLearnerKind::double_q, TabularLearnerKind::maxmin_q,
                    TabularLearnerKind::minto}) {
    TabularRunConfig c;
    c.learner.kind = kind;
    c.learner.ring_size = 2;
    c.total_steps = 5000;
    c.epsilon = 1.0;
    const auto result = run_tabular(mdp, c);
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      for (int a = 0; a < mdp.n_actions(); ++a) {
        if (result.visits[static_cast<std::size_t>(s * mdp.n_actions() + a)] == 0) continue;
        CHECK(result.estimate.at(s, a) == doctest::Approx(mdp.reward(s, a)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("unvisited entries keep their initial value") {
  GridWorldSpec spec;
  spec.walls = {{2, 0}, {2, 1}, {2, 2}, {2, 3}};
  spec.goal = {0, 4};
  const GridWorld g = build_gridworld(spec);
  TabularRunConfig c;
  c.learner.kind = TabularLearnerKind::minto;
  c.total_steps = 200;
  c.epsilon = 0.0;
  const auto r = run_tabular(g.mdp, c);
  const StateId far = g.state_of({4, 0});
  for (int a = 0; a < 4; ++a) {
    CHECK(r.visits[static_cast<std::size_t>(far * 4 + a)] == 0);
    CHECK(r.estimate.at(far, a) == 0.0);
  }
}

TEST_CASE("minto converges on a small garnet") {
  GarnetSpec spec;
  spec.n_states = 5;
  spec.n_actions = 2;
  spec.seed = 1;
  // p = 0.8 shrinks the steps too fast for gamma 0.9 within this budget
  spec.gamma = 0.5;
  const TabularMdp mdp = build_garnet(spec);
  const QTable q_star = value_iteration(mdp);
  TabularRunConfig c;
  c.learner.kind = TabularLearnerKind::minto;
  c.learner.ring_size = 2;
  c.schedule = StepSizeSchedule::polynomial(1.0, 0.8);
  c.epsilon = 0.5;
  c.total_steps = 200'000;
  c.oracle = q_star;
  const auto r = run_tabular(mdp, c);
  CHECK(max_norm_distance(r.estimate, q_star, r.visits, 100) < 0.05);
  CHECK(r.rows.back().dist_visited == doctest::Approx(max_norm_distance(r.estimate, q_star, r.visits, 100)));
}

TEST_CASE("minto reduces the maximization bias of q-learning") {
  OverestimationSpec spec;
  const NoisyRewardMdp env = build_overestimation_mdp(spec);
  const double oracle = max_value(value_iteration(env.base).row(kOverestimationProbe));
  double bias_q = 0.0;
  double bias_minto = 0.0;
  const int seeds = 30;
  for (int seed = 0; seed < seeds; ++seed) {
    TabularRunConfig c;
    c.seed = static_cast<std::uint64_t>(seed);
    c.total_steps = 5000;
    c.epsilon = 0.5;
    c.learner.kind = TabularLearnerKind::q_learning;
    bias_q += max_value(run_tabular(env, c).estimate.row(kOverestimationProbe)) - oracle;
    c.learner.kind = TabularLearnerKind::minto;
    c.learner.ring_size = 2;
    c.learner.sync_period = 50;
    bias_minto += max_value(run_tabular(env, c).estimate.row(kOverestimationProbe)) - oracle;
  }
  bias_q /= seeds;
  bias_minto /= seeds;
  CHECK(bias_q > 0.0);
  CHECK(bias_minto < bias_q);
}

TEST_CASE("learner names") {
  for (auto k : {TabularLearnerKind::q_learning, TabularLearnerKind::double_q, TabularLearnerKind::maxmin_q,
                 TabularLearnerKind::minto}) {
    CHECK(tabular_learner_from_string(to_string(k)) == k);
  }
  CHECK_THROWS(tabular_learner_from_string("sarsa"));
}

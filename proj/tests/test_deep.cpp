#include <doctest.h>

#include <cmath>

#include "minto/deep.hpp"
#include "minto/error.hpp"
#include "minto/runner.hpp"

using namespace minto;
using namespace minto::deep;

namespace {

// Network with zero weights whose outputs are its biases.
nn::Mlp constant_net(std::vector<double> values) {
  nn::Mlp net({1, static_cast<int>(values.size())}, nn::Activation::relu);
  for (std::size_t k = 0; k < values.size(); ++k) net.params()[net.bias_offset(0) + k] = values[k];
  return net;
}

Batch single(double reward, bool terminal) {
  Batch b;
  b.obs = nn::Matrix(1, 1, 0.5);
  b.next_obs = nn::Matrix(1, 1, 0.5);
  b.actions = {0};
  b.rewards = {reward};
  b.terminal = {static_cast<std::uint8_t>(terminal)};
  b.indices = {0};
  return b;
}

double target_for(LearnerKind kind, CombinerKind combiner, double beta = 3.0) {
  TrainerConfig c;
  c.kind = kind;
  c.combiner = combiner;
  c.gamma = 0.9;
  c.beta = beta;
  const nn::Mlp target = constant_net({1.0, 3.0});
  const nn::Mlp online = constant_net({2.0, 2.5});
  const nn::Mlp* targets[] = {&target};
  Combiner comb(combiner);
  return compute_targets(c, comb, online, targets, single(1.0, false)).targets[0];
}

std::unique_ptr<Environment> grid_env(int max_steps = 50) {
  GridWorldSpec spec;
  spec.slip_prob = 0.1;
  return std::make_unique<TabularEnvironment>(build_gridworld(spec).mdp, max_steps);
}

TrainerConfig small_config() {
  TrainerConfig c;
  c.hidden = {16};
  c.initial_samples = 64;
  c.target_period = 50;
  c.epsilon.duration = 500;
  return c;
}

}  // namespace

TEST_CASE("worked target example for every rule") {
  CHECK(target_for(LearnerKind::dqn_combiner, CombinerKind::min) == doctest::Approx(3.25));
  CHECK(target_for(LearnerKind::dqn_combiner, CombinerKind::max) == doctest::Approx(3.7));
  CHECK(target_for(LearnerKind::dqn_combiner, CombinerKind::mean) == doctest::Approx(3.475));
  CHECK(target_for(LearnerKind::dqn_combiner, CombinerKind::target_only) == doctest::Approx(3.7));
  CHECK(target_for(LearnerKind::dqn_combiner, CombinerKind::online_only) == doctest::Approx(3.25));
  // online argmax is action 1, evaluated by the target
  CHECK(target_for(LearnerKind::double_dqn, CombinerKind::target_only) == doctest::Approx(3.7));
  CHECK(target_for(LearnerKind::fr_dqn, CombinerKind::target_only) == doctest::Approx(3.25));
  // score [2 - 3*1, 2.5 + 3*0.5] = [-1, 4] picks action 1
  CHECK(target_for(LearnerKind::sc_dqn, CombinerKind::target_only) == doctest::Approx(3.7));
  // beta = 0 selects with the online net, like double DQN
  CHECK(target_for(LearnerKind::sc_dqn, CombinerKind::target_only, 0.0) == doctest::Approx(3.7));
}

TEST_CASE("maxmin takes the min over target members") {
  TrainerConfig c;
  c.kind = LearnerKind::maxmin_dqn;
  c.gamma = 0.5;
  const nn::Mlp t1 = constant_net({1.0, 4.0});
  const nn::Mlp t2 = constant_net({2.0, 3.0});
  const nn::Mlp* targets[] = {&t1, &t2};
  Combiner comb(CombinerKind::target_only);
  CHECK(compute_targets(c, comb, t1, targets, single(0.0, false)).targets[0] == 1.5);
}

TEST_CASE("terminal samples bootstrap nothing") {
  for (auto kind : {LearnerKind::dqn_combiner, LearnerKind::double_dqn, LearnerKind::maxmin_dqn, LearnerKind::fr_dqn,
                    LearnerKind::sc_dqn, LearnerKind::cql}) {
    for (auto ck : {CombinerKind::min, CombinerKind::target_only, CombinerKind::max}) {
      TrainerConfig c;
      c.kind = kind;
      c.combiner = ck;
      const nn::Mlp net = constant_net({5.0, 6.0});
      const nn::Mlp* targets[] = {&net};
      Combiner comb(ck);
      const auto r = compute_targets(c, comb, net, targets, single(-2.5, true));
      CHECK(r.targets[0] == -2.5);
      CHECK(r.greedy_action[0] == -1);
    }
  }
}

TEST_CASE("per-batch target ordering and the synced reduction") {
  RngStream init(1, StreamId::init);
  const nn::Mlp online = nn::Mlp::initialized({3, 8, 4}, nn::Activation::relu, init);
  const nn::Mlp target = nn::Mlp::initialized({3, 8, 4}, nn::Activation::relu, init);
  RngStream rng(2, StreamId::property);
  Batch b;
  b.obs = nn::Matrix(32, 3);
  b.next_obs = nn::Matrix(32, 3);
  for (auto& v : b.next_obs.data) v = rng.uniform(-1, 1);
  b.actions.assign(32, 0);
  b.rewards.assign(32, 0.1);
  b.terminal.assign(32, 0);
  const nn::Mlp* targets[] = {&target};
  auto run = [&](CombinerKind k, const nn::Mlp& on) {
    TrainerConfig c;
    c.combiner = k;
    Combiner comb(k);
    return compute_targets(c, comb, on, targets, b).targets;
  };
  const auto lo = run(CombinerKind::min, online);
  const auto mid = run(CombinerKind::mean, online);
  const auto hi = run(CombinerKind::max, online);
  const auto tg = run(CombinerKind::target_only, online);
  const auto on = run(CombinerKind::online_only, online);
  for (std::size_t i = 0; i < 32; ++i) {
    CHECK(lo[i] <= mid[i]);
    CHECK(mid[i] <= hi[i]);
    CHECK(tg[i] >= lo[i]);
    CHECK(tg[i] <= hi[i]);
    CHECK(on[i] >= lo[i]);
    CHECK(on[i] <= hi[i]);
  }
  CHECK(run(CombinerKind::min, target) == run(CombinerKind::target_only, target));
}

TEST_CASE("frobenius-style regularizer") {
  nn::Matrix q(2, 1, 1.0);
  nn::Matrix qt(2, 1, 0.5);
  nn::Matrix dout(2, 1);
  const std::vector<int> actions{0, 0};
  // kappa * mean((1.0 - 0.5)^2) = 0.25
  CHECK(add_fr_penalty(q, qt, actions, 1.0, dout) == doctest::Approx(0.25));
  CHECK(dout(0, 0) == doctest::Approx(0.5));

  RngStream init(3, StreamId::init);
  const nn::Mlp net = nn::Mlp::initialized({2, 4, 2}, nn::Activation::relu, init);
  Batch b = single(0.0, false);
  b.obs = nn::Matrix(1, 2, 0.3);
  b.next_obs = b.obs;
  const Penalty p = fr_regularizer(net, net, b, 1.0);
  CHECK(p.value == 0.0);
  for (double g : p.gradient) CHECK(g == 0.0);
}

TEST_CASE("conservative penalty") {
  nn::Matrix q(1, 2, 0.0);
  nn::Matrix dout(1, 2);
  const std::vector<int> actions{0};
  CHECK(add_cql_penalty(q, actions, 0.1, dout) == doctest::Approx(0.1 * std::log(2.0)).epsilon(1e-12));
  CHECK(dout(0, 0) == doctest::Approx(0.1 * (0.5 - 1.0)));
  CHECK(dout(0, 1) == doctest::Approx(0.1 * 0.5));
}

TEST_CASE("td loss and huber") {
  nn::Matrix q(2, 2, 0.0);
  const std::vector<int> actions{0, 1};
  const std::vector<double> y{2.0, 0.5};
  nn::Matrix d1(2, 2);
  CHECK(td_loss(q, actions, y, false, d1) == doctest::Approx((0.5 * 4 + 0.5 * 0.25) / 2));
  nn::Matrix d2(2, 2);
  CHECK(td_loss(q, actions, y, true, d2) == doctest::Approx((1.5 + 0.125) / 2));
  CHECK(d2(0, 0) == doctest::Approx(-0.5));
}

TEST_CASE("selection ratio") {
  std::vector<BatchTargetReport> reports(4);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    reports[i].attributable = true;
    reports[i].online_selected = {static_cast<std::int8_t>(i % 2), static_cast<std::int8_t>((i + 1) % 2)};
  }
  const auto r = online_selection_ratio(reports, 2);
  CHECK(r == std::vector<double>{0.5, 0.5});
  reports[0].attributable = false;
  CHECK_THROWS_AS(online_selection_ratio(reports, 2), ContractError);

  // right after a sync the networks coincide, every entry ties, ties count as target
  TrainerConfig c = small_config();
  c.combiner = CombinerKind::min;
  Trainer t(c, grid_env(), 4);
  for (int k = 0; k < 2000; ++k) t.env_step();
  REQUIRE(t.sync_count() > 0);
  for (const auto& rec : t.selection_records()) {
    if (rec.update % c.target_period == 0) CHECK(rec.online == 0);
  }
}

TEST_CASE("epsilon schedule") {
  EpsilonSchedule e{1.0, 0.1, 100};
  CHECK(e.value(0) == 1.0);
  CHECK(e.value(50) == doctest::Approx(0.55));
  CHECK(e.value(100) == doctest::Approx(0.1));
  CHECK(e.value(10'000) == doctest::Approx(0.1));
}

TEST_CASE("config validation names the field") {
  TrainerConfig c;
  c.batch_size = 0;
  try {
    c.validate();
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
}

TEST_CASE("sync count with the atari period") {
  GridWorldSpec spec;
  const GridWorld g = build_gridworld(spec);
  TabularEnvironment env(g.mdp, 50);
  runner::OfflineSpec os;
  os.size = 200;
  const auto data = runner::make_offline_dataset(env, os, 0);
  TrainerConfig c;
  c.kind = LearnerKind::cql;
  c.hidden = {4};
  c.batch_size = 4;
  c.target_period = 8000;
  Trainer t(c, std::make_unique<TabularEnvironment>(env), runner::dataset_to_buffer(data, env), 0);
  for (int k = 0; k < 100'000; ++k) t.update();
  CHECK(t.sync_count() == 12);
}

TEST_CASE("identical seeds give identical loss traces") {
  for (auto ck : {CombinerKind::min, CombinerKind::random}) {
    TrainerConfig c = small_config();
    c.combiner = ck;
    Trainer a(c, grid_env(), 9);
    Trainer b(c, grid_env(), 9);
    while (a.gradient_steps() < 1000) {
      a.env_step();
      b.env_step();
    }
    CHECK(a.loss_trace() == b.loss_trace());
    CHECK(a.online().params().size() == b.online().params().size());
    CHECK(a.online() == b.online());
  }
}

TEST_CASE("target-only trainer matches a plain dqn loop") {
  const std::uint64_t seed = 21;
  TrainerConfig c = small_config();
  c.combiner = CombinerKind::target_only;
  Trainer trainer(c, grid_env(), seed);
  for (int k = 0; k < 3000; ++k) trainer.env_step();

  auto env = grid_env();
  RngStream env_rng(seed, StreamId::environment);
  RngStream explore(seed, StreamId::exploration);
  RngStream buf_rng(seed, StreamId::buffer);
  RngStream init(seed, StreamId::init, 0);
  const int ns = env->observation_size();
  nn::Mlp online = nn::Mlp::initialized({ns, 16, 4}, nn::Activation::relu, init);
  nn::Mlp target = online;
  nn::AdamState adam(online.param_count(), c.learning_rate, c.adam_eps);
  ReplayBuffer buffer(c.buffer_capacity, static_cast<std::size_t>(ns));
  std::vector<double> obs(static_cast<std::size_t>(ns));
  std::vector<double> next(obs.size());
  std::vector<double> losses;
  int t = 0;
  long updates = 0;
  for (long step = 0; step < 3000; ++step) {
    if (t == 0) env->reset(env_rng, obs);
    int action;
    if (explore.uniform() < c.epsilon.value(step)) {
      action = static_cast<int>(explore.uniform_int(4));
    } else {
      action = argmax(nn::forward(online, obs));
    }
    const auto fb = env->step(action, env_rng, next);
    ++t;
    buffer.push(obs, action, fb.reward, next, fb.terminal);
    if (fb.terminal || t >= env->max_episode_steps()) {
      t = 0;
    } else {
      obs.swap(next);
    }
    if (static_cast<long>(buffer.size()) < c.initial_samples || (step + 1) % c.data_to_update != 0) continue;
    const Batch b = buffer.sample(static_cast<std::size_t>(c.batch_size), buf_rng);
    const nn::Matrix q_next = nn::forward(target, b.next_obs);
    const nn::Matrix q = nn::forward(online, b.obs);
    std::vector<double> res(b.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      double y = b.rewards[i];
      if (!b.terminal[i]) y += c.gamma * max_value(q_next.row(i));
      res[i] = y - q(i, static_cast<std::size_t>(b.actions[i]));
      loss += 0.5 * res[i] * res[i];
    }
    losses.push_back(loss / static_cast<double>(b.size()));
    nn::adam_step(online, nn::backward(online, b.obs, b.actions, res), adam);
    if (++updates % c.target_period == 0) target = online;
  }

  REQUIRE(buffer.size() == trainer.buffer().size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    REQUIRE(buffer.action_at(i) == trainer.buffer().action_at(i));
    REQUIRE(buffer.reward_at(i) == trainer.buffer().reward_at(i));
  }
  REQUIRE(losses.size() == trainer.loss_trace().size());
  for (std::size_t i = 0; i < losses.size(); ++i) CHECK(losses[i] == doctest::Approx(trainer.loss_trace()[i]).epsilon(1e-12));
  const auto p = trainer.online().params();
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - online.params()[i]) <= 1e-12);
}

TEST_CASE("gradient through the full target path matches finite differences") {
  TrainerConfig c = small_config();
  c.combiner = CombinerKind::min;
  c.activation = nn::Activation::tanh;
  Trainer t(c, grid_env(), 5);
  for (int k = 0; k < 400; ++k) t.env_step();
  RngStream rng(1, StreamId::property);
  const Batch b = t.buffer().sample(8, rng);
  Combiner comb(CombinerKind::min);
  const nn::Mlp* targets[] = {&t.target().params};
  const auto frozen = compute_targets(c, comb, t.online(), targets, b).targets;
  const auto g = t.loss_gradient(b);
  nn::Mlp probe = t.online();
  const double h = 1e-5;
  for (std::size_t i = 0; i < probe.param_count(); ++i) {
    const double keep = probe.params()[i];
    probe.params()[i] = keep + h;
    const double up = t.frozen_target_loss(probe, b, frozen);
    probe.params()[i] = keep - h;
    const double down = t.frozen_target_loss(probe, b, frozen);
    probe.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}) < 1e-4);
  }
}

TEST_CASE("learner names") {
  for (auto k : {LearnerKind::dqn_combiner, LearnerKind::double_dqn, LearnerKind::maxmin_dqn, LearnerKind::fr_dqn,
                 LearnerKind::sc_dqn, LearnerKind::cql}) {
    CHECK(learner_from_string(to_string(k)) == k);
  }
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(5, 1);
  for (int i = 0; i < 8; ++i) {
    const double o = i;
    buf.push(std::span<const double>(&o, 1), i, i, std::span<const double>(&o, 1), false);
  }
  CHECK(buf.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(buf.reward_at(i) == static_cast<double>(i + 3));

  RngStream rng(0, StreamId::buffer);
  const std::size_t n = 1'000'000;
  std::vector<std::size_t> hits(5, 0);
  const Batch b = buf.sample(n, rng);
  for (auto idx : b.indices) ++hits[idx];
  const double p = 0.2;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (auto h : hits) CHECK(std::abs(static_cast<double>(h) - n * p) <= 3 * sigma);
  CHECK(b.obs(0, 0) == static_cast<double>(b.indices[0] + 3));
}

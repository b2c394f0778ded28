#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "minto/error.hpp"
#include "minto/mdp.hpp"
#include "minto/rng.hpp"
#include "support.hpp"

using namespace minto;

namespace {

TabularMdp self_loop(double r, double gamma) { return TabularMdp(1, 1, {1.0}, {r}, gamma, {1.0}, {false}); }

TabularMdp coin_mdp() {
  // state 0 moves to 1 or 2 with equal probability; 1 and 2 are terminal
  std::vector<double> p(3 * 1 * 3, 0.0);
  p[1] = 0.5;
  p[2] = 0.5;
  p[3 + 1] = 1.0;
  p[6 + 2] = 1.0;
  return TabularMdp(3, 1, p, {0.0, 0.0, 0.0}, 0.9, {1.0, 0.0, 0.0}, {false, true, true});
}

}  // namespace

TEST_CASE("rng streams are independent per consumer and reproducible") {
  RngStream a(7, StreamId::environment);
  RngStream b(7, StreamId::environment);
  RngStream c(7, StreamId::exploration);
  RngStream d(7, StreamId::environment, 1);
  bool differs_c = false;
  bool differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_c |= x != c.next_u64();
    differs_d |= x != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("rng distributions") {
  RngStream rng(1, StreamId::property);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  int hits[3] = {0, 0, 0};
  for (int i = 0; i < 30'000; ++i) ++hits[rng.uniform_int(3)];
  for (int h : hits) CHECK(std::abs(h / 30'000.0 - 1.0 / 3.0) < 0.01);
  CHECK_THROWS_AS(rng.uniform_int(0), ContractError);
}

TEST_CASE("mdp constructor rejects malformed models") {
  CHECK_THROWS_AS(TabularMdp(1, 1, {0.9}, {0.0}, 0.9, {1.0}, {false}), ContractError);
  CHECK_THROWS_AS(TabularMdp(1, 1, {1.0}, {0.0}, 1.0, {1.0}, {false}), ContractError);
  CHECK_THROWS_AS(TabularMdp(1, 1, {1.0}, {0.0}, 0.9, {0.5}, {false}), ContractError);
  CHECK_THROWS_AS(TabularMdp(2, 1, {1.0, 0.0}, {0.0}, 0.9, {1.0, 0.0}, {false, false}), ContractError);
}

TEST_CASE("value iteration on a self loop is the geometric series") {
  const QTable q = value_iteration(self_loop(1.0, 0.9));
  CHECK(q.at(0, 0) == doctest::Approx(10.0).epsilon(1e-9));
  const QTable r = bellman_backup(self_loop(1.0, 0.9), q);
  CHECK(std::abs(r.at(0, 0) - q.at(0, 0)) <= kDefaultOracleTol);
}

TEST_CASE("value iteration with zero discount returns the reward table") {
  const TabularMdp mdp = coin_mdp().with_gamma(0.0).with_reward(0, 0, -1.25);
  const QTable q = value_iteration(mdp);
  for (StateId s = 0; s < 3; ++s) CHECK(q.at(s, 0) == mdp.reward(s, 0));
}

TEST_CASE("value iteration matches the chain oracle") {
  const auto& o = oracles()["chain3"];
  const TabularMdp mdp = mdp_from_json(o["mdp"]);
  const QTable q = value_iteration(mdp, 1e-12);
  for (StateId s = 0; s < 3; ++s) CHECK(q.at(s, 0) == doctest::Approx(o["q"][s].get<double>()).epsilon(1e-10));
}

TEST_CASE("terminal successors carry no future value") {
  const TabularMdp mdp = coin_mdp().with_reward(0, 0, 2.0);
  CHECK(value_iteration(mdp).at(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("step follows the transition row") {
  const TabularMdp det = self_loop(-3.2, 0.9);
  RngStream rng(3, StreamId::environment);
  for (int i = 0; i < 10; ++i) {
    const Transition t = step(det, 0, 0, rng);
    CHECK(t.next_state == 0);
    CHECK(t.reward == -3.2);
    CHECK_FALSE(t.terminal);
  }

  const TabularMdp coin = coin_mdp();
  RngStream r1(5, StreamId::environment);
  RngStream r2(5, StreamId::environment);
  int ones = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    const Transition t = step(coin, 0, 0, r1);
    CHECK(t.next_state == step(coin, 0, 0, r2).next_state);
    CHECK(t.terminal);
    ones += t.next_state == 1;
  }
  CHECK(std::abs(static_cast<double>(ones) / n - 0.5) < 0.01);
  CHECK_THROWS_AS(step(coin, 1, 0, r1), ContractError);
  CHECK_THROWS_AS(step(coin, 0, 1, r1), ContractError);
}

TEST_CASE("reset draws from the initial distribution") {
  RngStream rng(11, StreamId::environment);
  for (int i = 0; i < 100; ++i) CHECK(reset(coin_mdp(), rng) == 0);

  std::vector<double> p(16, 0.0);
  for (int s = 0; s < 4; ++s) p[s * 4 + s] = 1.0;
  const TabularMdp four(4, 1, p, {0, 0, 0, 0}, 0.9, {0.25, 0.25, 0.25, 0.25}, {false, false, false, false});
  int counts[4] = {0, 0, 0, 0};
  const int n = 100'000;
  RngStream a(2, StreamId::environment);
  RngStream b(2, StreamId::environment);
  for (int i = 0; i < n; ++i) {
    const StateId s = reset(four, a);
    CHECK(s == reset(four, b));
    ++counts[s];
  }
  for (int c : counts) CHECK(std::abs(static_cast<double>(c) / n - 0.25) < 0.01);
}

TEST_CASE("mdp json round trip") {
  const TabularMdp mdp = coin_mdp().with_reward(0, 0, 0.75);
  nlohmann::json j;
  to_json(j, mdp);
  CHECK(mdp_from_json(j) == mdp);
  j["gamma"] = 1.5;
  CHECK_THROWS(mdp_from_json(j));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const std::vector<double> v{1.0, 3.0, 3.0, -2.0};
  CHECK(argmax(v) == 1);
  CHECK(max_value(v) == 3.0);
}

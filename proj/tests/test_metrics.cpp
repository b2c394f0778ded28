#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "minto/error.hpp"
#include "minto/metrics.hpp"
#include "support.hpp"

using namespace minto;
using namespace minto::metrics;

namespace {

// Each value replicated four times puts the quartile cut points on integers.
double iqm_oracle(std::vector<double> xs) {
  const std::size_t n = xs.size();
  std::vector<double> rep;
  for (double x : xs) rep.insert(rep.end(), 4, x);
  std::sort(rep.begin(), rep.end());
  double s = 0.0;
  for (std::size_t i = n; i < 3 * n; ++i) s += rep[i];
  return s / static_cast<double>(2 * n);
}

CurveSet gaussian_set(int seeds, std::uint64_t seed) {
  RngStream rng(seed, StreamId::property);
  CurveSet set;
  set.scores.assign(1, {});
  set.anchors = {Anchor{0.0, 1.0}};
  for (int s = 0; s < seeds; ++s) set.scores[0].push_back({rng.normal(0.5, 0.1)});
  return set;
}

}  // namespace

TEST_CASE("iqm") {
  CHECK(iqm(std::vector<double>{4.0, 4.0, 4.0}) == 4.0);
  CHECK(iqm(std::vector<double>{-2.5}) == -2.5);
  std::vector<double> ten;
  for (int i = 1; i <= 10; ++i) ten.push_back(i);
  CHECK(iqm(ten) == doctest::Approx(oracles()["iqm_1_to_10"].get<double>()).epsilon(1e-15));
  CHECK(iqm(ten) == doctest::Approx(iqm_oracle(ten)).epsilon(1e-15));
  CHECK_THROWS_AS(iqm(std::vector<double>{}), ContractError);

  RngStream rng(4, StreamId::property);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> xs(1 + rng.uniform_int(40));
    for (auto& x : xs) x = rng.uniform(-50, 50);
    CHECK(std::abs(iqm(xs) - iqm_oracle(xs)) <= 1e-12);
  }
}

TEST_CASE("normalize") {
  const std::vector<double> x{2.0, 6.0, 10.0};
  const auto n = normalize(x, 2.0, 6.0);
  CHECK(n[0] == 0.0);
  CHECK(n[1] == 1.0);
  CHECK(n[2] == 2.0);
  const auto back = denormalize(n, 2.0, 6.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) <= 1e-12);
  CHECK_THROWS_AS(normalize(x, 1.0, 1.0), ContractError);
}

TEST_CASE("auc") {
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3}) == doctest::Approx(0.3));
  const int epochs = 50;
  std::vector<double> ramp;
  for (int e = 0; e < epochs; ++e) ramp.push_back(static_cast<double>(e) / (epochs - 1));
  CHECK(std::abs(auc(ramp) - 0.5) <= 1.0 / (2 * epochs));
  std::vector<double> early{0.0, 0.5, 1.0, 1.0, 1.0};
  std::vector<double> late{0.0, 0.0, 0.5, 1.0, 1.0};
  CHECK(auc(early) > auc(late));
}

TEST_CASE("bootstrap intervals") {
  SUBCASE("zero variance collapses") {
    CurveSet set;
    set.scores = {{{0.7, 0.2}, {0.7, 0.2}, {0.7, 0.2}}};
    set.anchors = {Anchor{}};
    RngStream rng(1, StreamId::bootstrap);
    for (const auto& ci : bootstrap_ci(set, rng)) {
      CHECK(ci.low == ci.point);
      CHECK(ci.high == ci.point);
    }
  }

  SUBCASE("contains the point and is reproducible") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const CurveSet set = gaussian_set(7, s);
      RngStream a(s, StreamId::bootstrap);
      RngStream b(s, StreamId::bootstrap);
      const auto ca = bootstrap_ci(set, a, {500, 0.95});
      const auto cb = bootstrap_ci(set, b, {500, 0.95});
      CHECK(ca[0].low <= ca[0].point);
      CHECK(ca[0].point <= ca[0].high);
      CHECK(ca[0].low == cb[0].low);
      CHECK(ca[0].high == cb[0].high);
    }
  }

  SUBCASE("needs two seeds per task") {
    CurveSet set = gaussian_set(1, 0);
    RngStream rng(0, StreamId::bootstrap);
    CHECK_THROWS_AS(bootstrap_ci(set, rng), ContractError);
  }

  SUBCASE("paired difference") {
    std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    std::vector<double> b{0.5, 1.5, 2.5, 3.5};
    RngStream rng(0, StreamId::bootstrap);
    const auto d = bootstrap_mean_difference(a, b, rng);
    CHECK(d.point == 0.5);
    CHECK(d.low == doctest::Approx(0.5));
    CHECK(d.high == doctest::Approx(0.5));
  }
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> s{0.0, 10.0, 20.0};
  CHECK(quantile_sorted(s, 0.0) == 0.0);
  CHECK(quantile_sorted(s, 0.25) == 5.0);
  CHECK(quantile_sorted(s, 1.0) == 20.0);
}

TEST_CASE("curve sets") {
  CurveSet set;
  set.scores = {{{0.0, 2.0}, {1.0, 3.0}}};
  set.anchors = {Anchor{0.0, 2.0}};
  set.validate();
  const auto norm = set.normalized();
  CHECK(norm.scores[0][1][1] == 1.5);
  const auto a = set.auc_set();
  CHECK(a.scores[0][0] == std::vector<double>{0.5});
  CHECK(a.scores[0][1] == std::vector<double>{1.0});
  CHECK(pooled_iqm(set) == std::vector<double>{0.5, 2.5});
  set.scores[0][1].pop_back();
  CHECK_THROWS_AS(set.validate(), ContractError);
}

TEST_CASE("gridworld anchors come from rollouts") {
  GridWorldSpec spec;
  spec.slip_prob = 0.1;
  deep::TabularEnvironment env(build_gridworld(spec).mdp, 50);
  const Anchor a = tabular_anchor(env, 200, 0);
  CHECK(a.floor < a.ceiling);
  CHECK(a.ceiling > 0.9);  // the greedy policy almost always reaches the goal
  CHECK(a.floor >= 0.0);
  deep::CartPoleEnvironment cp;
  const Anchor c = cartpole_anchor(cp, 100, 0);
  CHECK(c.ceiling == cp.max_episode_steps());
  CHECK(c.floor > 5.0);
  CHECK(c.floor < 50.0);
}

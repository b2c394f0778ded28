#include "minto/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "minto/deep.hpp"
#include "minto/error.hpp"

namespace minto::metrics {

double iqm(std::span<const double> values) {
  require(!values.empty(), "iqm: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double lo = 0.25 * n;
  const double hi = 0.75 * n;
  double sum = 0.0;
  const auto first = static_cast<std::size_t>(std::floor(lo));
  const auto last = std::min(v.size(), static_cast<std::size_t>(std::ceil(hi)));
  for (std::size_t i = first; i < last; ++i) {
    const double w = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
    if (w > 0.0) sum += w * v[i];
  }
  const double out = sum / (hi - lo);
  // guard against rounding pushing the result outside the data range
  return std::clamp(out, v.front(), v.back());
}

double mean(std::span<const double> values) {
  require(!values.empty(), "mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<double> normalize(std::span<const double> scores, double floor, double ceiling) {
  require(ceiling > floor, "normalize: ceiling must exceed floor");
  std::vector<double> out(scores.size());
  const double span = ceiling - floor;
  std::transform(scores.begin(), scores.end(), out.begin(), [&](double x) { return (x - floor) / span; });
  return out;
}

std::vector<double> denormalize(std::span<const double> scores, double floor, double ceiling) {
  require(ceiling > floor, "denormalize: ceiling must exceed floor");
  std::vector<double> out(scores.size());
  const double span = ceiling - floor;
  std::transform(scores.begin(), scores.end(), out.begin(), [&](double x) { return x * span + floor; });
  return out;
}

double auc(std::span<const double> curve) {
  require(!curve.empty(), "auc: empty curve");
  return mean(curve);
}

std::size_t CurveSet::n_epochs() const {
  if (scores.empty() || scores[0].empty()) return 0;
  return scores[0][0].size();
}

void CurveSet::validate() const {
  require(!scores.empty(), "CurveSet: no tasks");
  require(anchors.size() == scores.size(), "CurveSet: one anchor per task required");
  const std::size_t epochs = n_epochs();
  require(epochs > 0, "CurveSet: no epochs");
  for (std::size_t t = 0; t < scores.size(); ++t) {
    require(!scores[t].empty(), "CurveSet: task without seeds");
    require(anchors[t].ceiling > anchors[t].floor, "CurveSet: anchor ceiling must exceed floor");
    for (const auto& run : scores[t]) require(run.size() == epochs, "CurveSet: ragged epochs");
  }
}

CurveSet CurveSet::normalized() const {
  validate();
  CurveSet out;
  out.scores.resize(scores.size());
  out.anchors.assign(scores.size(), Anchor{0.0, 1.0});
  for (std::size_t t = 0; t < scores.size(); ++t) {
    for (const auto& run : scores[t]) out.scores[t].push_back(normalize(run, anchors[t].floor, anchors[t].ceiling));
  }
  return out;
}

CurveSet CurveSet::auc_set() const {
  const CurveSet norm = normalized();
  CurveSet out;
  out.scores.resize(norm.scores.size());
  out.anchors = norm.anchors;
  for (std::size_t t = 0; t < norm.scores.size(); ++t) {
    for (const auto& run : norm.scores[t]) out.scores[t].push_back({auc(run)});
  }
  return out;
}

namespace {

std::vector<double> pooled_iqm_with(const CurveSet& set, const std::vector<std::vector<std::size_t>>& picks) {
  const std::size_t epochs = set.n_epochs();
  std::vector<double> out(epochs);
  std::vector<double> column;
  for (std::size_t e = 0; e < epochs; ++e) {
    column.clear();
    for (std::size_t t = 0; t < set.scores.size(); ++t) {
      for (std::size_t i : picks[t]) column.push_back(set.scores[t][i][e]);
    }
    out[e] = iqm(column);
  }
  return out;
}

std::vector<std::vector<std::size_t>> identity_picks(const CurveSet& set) {
  std::vector<std::vector<std::size_t>> picks(set.scores.size());
  for (std::size_t t = 0; t < set.scores.size(); ++t) {
    picks[t].resize(set.scores[t].size());
    std::iota(picks[t].begin(), picks[t].end(), std::size_t{0});
  }
  return picks;
}

void check_options(const BootstrapOptions& o) {
  require(o.resamples > 0, "bootstrap: resamples must be positive");
  require(o.level > 0.0 && o.level < 1.0, "bootstrap: level must lie in (0, 1)");
}

}  // namespace

std::vector<double> pooled_iqm(const CurveSet& set) {
  set.validate();
  return pooled_iqm_with(set, identity_picks(set));
}

double quantile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), "quantile: empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

std::vector<Interval> bootstrap_ci(const CurveSet& set, RngStream& rng, BootstrapOptions options) {
  set.validate();
  check_options(options);
  for (const auto& task : set.scores) require(task.size() >= 2, "bootstrap_ci: at least 2 seeds per task required");
  const std::size_t epochs = set.n_epochs();
  const auto point = pooled_iqm(set);
  std::vector<std::vector<double>> samples(epochs, std::vector<double>(static_cast<std::size_t>(options.resamples)));
  auto picks = identity_picks(set);
  for (int r = 0; r < options.resamples; ++r) {
    for (std::size_t t = 0; t < set.scores.size(); ++t) {
      for (auto& p : picks[t]) p = static_cast<std::size_t>(rng.uniform_int(set.scores[t].size()));
    }
    const auto stat = pooled_iqm_with(set, picks);
    for (std::size_t e = 0; e < epochs; ++e) samples[e][static_cast<std::size_t>(r)] = stat[e];
  }
  const double tail = 0.5 * (1.0 - options.level);
  std::vector<Interval> out(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::sort(samples[e].begin(), samples[e].end());
    out[e].point = point[e];
    out[e].low = std::min(point[e], quantile_sorted(samples[e], tail));
    out[e].high = std::max(point[e], quantile_sorted(samples[e], 1.0 - tail));
  }
  return out;
}

Interval bootstrap_mean_difference(std::span<const double> a, std::span<const double> b, RngStream& rng,
                                   BootstrapOptions options) {
  require(a.size() >= 2 && b.size() >= 2, "bootstrap_mean_difference: at least 2 values per side required");
  check_options(options);
  const bool paired = a.size() == b.size();
  Interval out;
  out.point = mean(a) - mean(b);
  std::vector<double> stats(static_cast<std::size_t>(options.resamples));
  for (auto& s : stats) {
    double sa = 0.0;
    double sb = 0.0;
    if (paired) {
      for (std::size_t k = 0; k < a.size(); ++k) {
        const auto i = static_cast<std::size_t>(rng.uniform_int(a.size()));
        sa += a[i];
        sb += b[i];
      }
    } else {
      for (std::size_t k = 0; k < a.size(); ++k) sa += a[static_cast<std::size_t>(rng.uniform_int(a.size()))];
      for (std::size_t k = 0; k < b.size(); ++k) sb += b[static_cast<std::size_t>(rng.uniform_int(b.size()))];
    }
    s = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(stats.begin(), stats.end());
  const double tail = 0.5 * (1.0 - options.level);
  out.low = std::min(out.point, quantile_sorted(stats, tail));
  out.high = std::max(out.point, quantile_sorted(stats, 1.0 - tail));
  return out;
}

namespace {

double random_policy_return(deep::Environment& env, int episodes, RngStream& rng) {
  const auto na = static_cast<std::uint64_t>(env.n_actions());
  const auto policy = [na](std::span<const double>, RngStream& r) { return static_cast<int>(r.uniform_int(na)); };
  return deep::rollout_return(env, policy, episodes, rng);
}

}  // namespace

Anchor tabular_anchor(const deep::TabularEnvironment& env, int episodes, std::uint64_t seed) {
  require(episodes > 0, "tabular_anchor: episodes must be positive");
  auto floor_env = env.clone();
  RngStream floor_rng(seed, StreamId::evaluation, 0xF100);
  Anchor a;
  a.floor = random_policy_return(*floor_env, episodes, floor_rng);

  const QTable q_star = value_iteration(env.mdp());
  deep::TabularEnvironment ceil_env = env;
  RngStream ceil_rng(seed, StreamId::evaluation, 0xCE11);
  const auto policy = [&](std::span<const double>, RngStream&) { return argmax(q_star.row(ceil_env.state())); };
  a.ceiling = deep::rollout_return(ceil_env, policy, episodes, ceil_rng);
  if (a.ceiling <= a.floor) a.ceiling = a.floor + 1.0;
  return a;
}

Anchor cartpole_anchor(const deep::CartPoleEnvironment& env, int episodes, std::uint64_t seed) {
  require(episodes > 0, "cartpole_anchor: episodes must be positive");
  auto e = env.clone();
  RngStream rng(seed, StreamId::evaluation, 0xF100);
  Anchor a;
  a.floor = random_policy_return(*e, episodes, rng);
  a.ceiling = static_cast<double>(env.max_episode_steps());
  return a;
}

}  // namespace minto::metrics

#pragma once

#include <span>
#include <vector>

#include "minto/environment.hpp"
#include "minto/rng.hpp"

namespace minto::metrics {

/// Interquartile mean with fractional trimming: after sorting, element i covers
/// [i, i+1) and is weighted by its overlap with [n/4, 3n/4].
double iqm(std::span<const double> values);

double mean(std::span<const double> values);

/// (x - floor) / (ceiling - floor), not clipped.
std::vector<double> normalize(std::span<const double> scores, double floor, double ceiling);
std::vector<double> denormalize(std::span<const double> scores, double floor, double ceiling);

/// Mean of per-epoch scores.
double auc(std::span<const double> curve);

struct Anchor {
  double floor = 0.0;
  double ceiling = 1.0;
};

/// scores[task][seed][epoch] plus one normalization anchor per task.
struct CurveSet {
  std::vector<std::vector<std::vector<double>>> scores;
  std::vector<Anchor> anchors;

  std::size_t n_tasks() const { return scores.size(); }
  std::size_t n_epochs() const;
  /// Throws ContractError on ragged data or a degenerate anchor.
  void validate() const;
  /// Normalized copy with identity anchors.
  CurveSet normalized() const;
  /// Per-run AUCs of the normalized curves, collapsed to one epoch.
  CurveSet auc_set() const;
};

struct Interval {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
};

struct BootstrapOptions {
  int resamples = 2000;
  double level = 0.95;
};

/// IQM across all (task, seed) runs at each epoch.
std::vector<double> pooled_iqm(const CurveSet& set);

/// Stratified percentile bootstrap of the pooled IQM per epoch: seeds are
/// resampled with replacement within each task and whole runs are kept
/// together. Scores are used as given; call normalized() first if needed.
/// Intervals are widened to include the point estimate when the percentile
/// interval misses it.
std::vector<Interval> bootstrap_ci(const CurveSet& set, RngStream& rng, BootstrapOptions options = {});

/// Percentile bootstrap of mean(a) - mean(b). Equal-length inputs are treated
/// as paired by index.
Interval bootstrap_mean_difference(std::span<const double> a, std::span<const double> b, RngStream& rng,
                                   BootstrapOptions options = {});

/// Linear-interpolated quantile of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);

/// Normalization anchors for a tabular environment: the uniform-random policy
/// return and the return of the greedy policy of value_iteration's Q*.
Anchor tabular_anchor(const deep::TabularEnvironment& env, int episodes, std::uint64_t seed);
/// Cart-pole anchors: uniform-random policy return and the episode cap.
Anchor cartpole_anchor(const deep::CartPoleEnvironment& env, int episodes, std::uint64_t seed);

}  // namespace minto::metrics

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minto/rng.hpp"

namespace minto {

enum class CombinerKind { target_only, online_only, min, max, mean, random };

/// Granularity of the Random combiner's coin.
enum class RandomGranularity { per_sample, per_entry };

/// Config names: "min" | "max" | "mean" | "random" | "target_only" | "online_only".
std::string_view to_string(CombinerKind kind);
CombinerKind combiner_from_string(std::string_view name);
const std::vector<CombinerKind>& all_combiners();

/// Which network supplied the value at an entry after combination.
enum class Source : unsigned char { target, online };

/// Elementwise merge of target- and online-network action values.
class Combiner {
 public:
  explicit Combiner(CombinerKind kind, std::optional<RngStream> rng = std::nullopt,
                    RandomGranularity granularity = RandomGranularity::per_sample);

  CombinerKind kind() const { return kind_; }

  /// Writes the combined vector into out (same length as inputs).
  void combine_into(std::span<const double> q_target, std::span<const double> q_online, std::span<double> out);
  std::vector<double> combine(std::span<const double> q_target, std::span<const double> q_online);

  /// Source attribution exists for Min and Random only.
  bool attributable() const { return kind_ == CombinerKind::min || kind_ == CombinerKind::random; }
  /// Source used at entry `a` by the last combine call. Min ties count as target.
  Source last_source(std::size_t a) const { return last_sources_.at(a); }

 private:
  CombinerKind kind_;
  std::optional<RngStream> rng_;
  RandomGranularity granularity_;
  std::vector<Source> last_sources_;
};

/// Free-function form; Random requires a combiner with a stream, so only the
/// deterministic variants are accepted here.
std::vector<double> combine(CombinerKind kind, std::span<const double> q_target, std::span<const double> q_online);

/// Action values of a single state indexed by (action, snapshot j); j runs over
/// the historical time labels in snapshot_times.
class QTensor {
 public:
  QTensor(std::size_t n_actions, std::vector<long> snapshot_times, std::vector<double> values);
  /// All-zero tensor with labels 0..n_snapshots-1.
  QTensor(std::size_t n_actions, std::size_t n_snapshots);

  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_snapshots() const { return times_.size(); }
  const std::vector<long>& snapshot_times() const { return times_; }

  double& at(std::size_t a, std::size_t j) { return values_[a * times_.size() + j]; }
  double at(std::size_t a, std::size_t j) const { return values_[a * times_.size() + j]; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t n_actions_;
  std::vector<long> times_;
  std::vector<double> values_;
};

/// max over actions of min over snapshots.
double g_minto(const QTensor& q);

/// max |Q - Q'| over all entries (shapes must match).
double max_abs_diff(const QTensor& a, const QTensor& b);

using TensorOperator = std::function<double(const QTensor&)>;

struct NonExpansionReport {
  double max_violation = 0.0;
  std::size_t trials = 0;
  std::size_t violations = 0;  // trials with |G(Q)-G(Q')| > max|Q-Q'|
};

struct TensorSampling {
  std::size_t max_actions = 8;
  std::size_t max_snapshots = 4;
  double low = -100.0;
  double high = 100.0;
};

/// Random tensor with uniform shape in [1, max] along each axis.
QTensor random_tensor(const TensorSampling& sampling, RngStream& rng);

/// Samples (Q, Q') pairs of equal shape and reports
/// max over trials of |G(Q) - G(Q')| - max|Q - Q'|.
NonExpansionReport check_non_expansion(const TensorOperator& op, std::size_t trials, RngStream& rng,
                                       const TensorSampling& sampling = {});

/// Max over trials of |G(Q_same) - max_a Q_a| where every snapshot of an action
/// holds the same value.
double check_identical_inputs(const TensorOperator& op, std::size_t trials, RngStream& rng,
                              const TensorSampling& sampling = {});

}  // namespace minto

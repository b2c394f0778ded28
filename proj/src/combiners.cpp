#include "minto/combiners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "minto/error.hpp"

namespace minto {

std::string_view to_string(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::target_only: return "target_only";
    case CombinerKind::online_only: return "online_only";
    case CombinerKind::min: return "min";
    case CombinerKind::max: return "max";
    case CombinerKind::mean: return "mean";
    case CombinerKind::random: return "random";
  }
  return "?";
}

CombinerKind combiner_from_string(std::string_view name) {
  for (auto kind : all_combiners()) {
    if (to_string(kind) == name) return kind;
  }
  throw ContractError("unknown combiner '" + std::string(name) +
                      "' (expected min|max|mean|random|target_only|online_only)");
}

const std::vector<CombinerKind>& all_combiners() {
  static const std::vector<CombinerKind> kinds{CombinerKind::target_only, CombinerKind::online_only,
                                               CombinerKind::min,         CombinerKind::max,
                                               CombinerKind::mean,        CombinerKind::random};
  return kinds;
}

Combiner::Combiner(CombinerKind kind, std::optional<RngStream> rng, RandomGranularity granularity)
    : kind_(kind), rng_(std::move(rng)), granularity_(granularity) {
  require(kind_ != CombinerKind::random || rng_.has_value(), "Combiner: random variant needs an rng stream");
}

void Combiner::combine_into(std::span<const double> q_target, std::span<const double> q_online,
                            std::span<double> out) {
  require(q_target.size() == q_online.size(), "combine: length mismatch between target and online vectors");
  require(out.size() == q_target.size(), "combine: output length mismatch");
  const std::size_t n = q_target.size();
  for (std::size_t a = 0; a < n; ++a) {
    if (!std::isfinite(q_target[a]) || !std::isfinite(q_online[a])) throw NumericError("combine: non-finite input");
  }
  last_sources_.assign(n, Source::target);
  switch (kind_) {
    case CombinerKind::target_only:
      std::copy(q_target.begin(), q_target.end(), out.begin());
      break;
    case CombinerKind::online_only:
      std::copy(q_online.begin(), q_online.end(), out.begin());
      last_sources_.assign(n, Source::online);
      break;
    case CombinerKind::min:
      for (std::size_t a = 0; a < n; ++a) {
        const bool online = q_online[a] < q_target[a];
        out[a] = online ? q_online[a] : q_target[a];
        last_sources_[a] = online ? Source::online : Source::target;
      }
      break;
    case CombinerKind::max:
      for (std::size_t a = 0; a < n; ++a) out[a] = std::max(q_target[a], q_online[a]);
      break;
    case CombinerKind::mean:
      for (std::size_t a = 0; a < n; ++a) out[a] = 0.5 * (q_target[a] + q_online[a]);
      break;
    case CombinerKind::random:
      if (granularity_ == RandomGranularity::per_sample) {
        const bool online = rng_->bernoulli(0.5);
        const auto src = online ? q_online : q_target;
        std::copy(src.begin(), src.end(), out.begin());
        last_sources_.assign(n, online ? Source::online : Source::target);
      } else {
        for (std::size_t a = 0; a < n; ++a) {
          const bool online = rng_->bernoulli(0.5);
          out[a] = online ? q_online[a] : q_target[a];
          last_sources_[a] = online ? Source::online : Source::target;
        }
      }
      break;
  }
}

std::vector<double> Combiner::combine(std::span<const double> q_target, std::span<const double> q_online) {
  std::vector<double> out(q_target.size());
  combine_into(q_target, q_online, out);
  return out;
}

std::vector<double> combine(CombinerKind kind, std::span<const double> q_target, std::span<const double> q_online) {
  require(kind != CombinerKind::random, "combine: the random variant needs a Combiner with a stream");
  Combiner c(kind);
  return c.combine(q_target, q_online);
}

QTensor::QTensor(std::size_t n_actions, std::vector<long> snapshot_times, std::vector<double> values)
    : n_actions_(n_actions), times_(std::move(snapshot_times)), values_(std::move(values)) {
  require(n_actions_ > 0 && !times_.empty(), "QTensor: needs at least one action and one snapshot");
  require(values_.size() == n_actions_ * times_.size(), "QTensor: value count does not match shape");
  for (std::size_t j = 1; j < times_.size(); ++j) {
    require(times_[j - 1] < times_[j], "QTensor: snapshot_times must be strictly increasing");
  }
  for (double v : values_) require(std::isfinite(v), "QTensor: entries must be finite");
}

QTensor::QTensor(std::size_t n_actions, std::size_t n_snapshots)
    : n_actions_(n_actions), times_(n_snapshots), values_(n_actions * n_snapshots, 0.0) {
  require(n_actions_ > 0 && n_snapshots > 0, "QTensor: needs at least one action and one snapshot");
  for (std::size_t j = 0; j < n_snapshots; ++j) times_[j] = static_cast<long>(j);
}

double g_minto(const QTensor& q) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.n_actions(); ++a) {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < q.n_snapshots(); ++j) lowest = std::min(lowest, q.at(a, j));
    best = std::max(best, lowest);
  }
  return best;
}

double max_abs_diff(const QTensor& a, const QTensor& b) {
  require(a.n_actions() == b.n_actions() && a.n_snapshots() == b.n_snapshots(), "max_abs_diff: shape mismatch");
  double d = 0.0;
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) d = std::max(d, std::abs(va[i] - vb[i]));
  return d;
}

namespace {

QTensor random_tensor_of_shape(std::size_t n_actions, std::size_t n_snapshots, const TensorSampling& sampling,
                               RngStream& rng) {
  QTensor q(n_actions, n_snapshots);
  for (std::size_t a = 0; a < n_actions; ++a) {
    for (std::size_t j = 0; j < n_snapshots; ++j) q.at(a, j) = rng.uniform(sampling.low, sampling.high);
  }
  return q;
}

}  // namespace

QTensor random_tensor(const TensorSampling& sampling, RngStream& rng) {
  const std::size_t na = 1 + rng.uniform_int(sampling.max_actions);
  const std::size_t nk = 1 + rng.uniform_int(sampling.max_snapshots);
  return random_tensor_of_shape(na, nk, sampling, rng);
}

NonExpansionReport check_non_expansion(const TensorOperator& op, std::size_t trials, RngStream& rng,
                                       const TensorSampling& sampling) {
  require(trials > 0, "check_non_expansion: trials must be positive");
  NonExpansionReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  report.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const QTensor q = random_tensor(sampling, rng);
    QTensor q2 = random_tensor_of_shape(q.n_actions(), q.n_snapshots(), sampling, rng);
    // Half the trials use a small perturbation of Q, where the inequality is tightest.
    if (t % 2 == 1) {
      const double scale = std::pow(10.0, -rng.uniform(0.0, 6.0));
      for (std::size_t a = 0; a < q.n_actions(); ++a) {
        for (std::size_t j = 0; j < q.n_snapshots(); ++j) q2.at(a, j) = q.at(a, j) + scale * rng.uniform(-1.0, 1.0);
      }
    }
    const double violation = std::abs(op(q) - op(q2)) - max_abs_diff(q, q2);
    if (violation > 0.0) ++report.violations;
    report.max_violation = std::max(report.max_violation, violation);
  }
  return report;
}

double check_identical_inputs(const TensorOperator& op, std::size_t trials, RngStream& rng,
                              const TensorSampling& sampling) {
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t na = 1 + rng.uniform_int(sampling.max_actions);
    const std::size_t nk = 1 + rng.uniform_int(sampling.max_snapshots);
    QTensor q(na, nk);
    double expected = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < na; ++a) {
      const double v = rng.uniform(sampling.low, sampling.high);
      expected = std::max(expected, v);
      for (std::size_t j = 0; j < nk; ++j) q.at(a, j) = v;
    }
    worst = std::max(worst, std::abs(op(q) - expected));
  }
  return worst;
}

}  // namespace minto

#include "minto/deep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "minto/error.hpp"

namespace minto::deep {

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::dqn_combiner: return "dqn_combiner";
    case LearnerKind::double_dqn: return "double_dqn";
    case LearnerKind::maxmin_dqn: return "maxmin_dqn";
    case LearnerKind::fr_dqn: return "fr_dqn";
    case LearnerKind::sc_dqn: return "sc_dqn";
    case LearnerKind::cql: return "cql";
  }
  return "?";
}

LearnerKind learner_from_string(const std::string& name) {
  for (auto k : {LearnerKind::dqn_combiner, LearnerKind::double_dqn, LearnerKind::maxmin_dqn, LearnerKind::fr_dqn,
                 LearnerKind::sc_dqn, LearnerKind::cql}) {
    if (to_string(k) == name) return k;
  }
  throw ContractError("unknown learner '" + name + "'");
}

double EpsilonSchedule::value(long env_step) const {
  if (duration <= 0) return end;
  const double frac = std::min(1.0, static_cast<double>(env_step) / static_cast<double>(duration));
  return start + (end - start) * frac;
}

void TrainerConfig::validate() const {
  require(gamma >= 0.0 && gamma < 1.0, "gamma: must lie in [0, 1)");
  require(batch_size > 0, "batch_size: must be positive");
  require(target_period > 0, "target_period: must be positive");
  require(data_to_update > 0, "data_to_update: must be positive");
  require(initial_samples >= 0, "initial_samples: must be >= 0");
  require(buffer_capacity > 0, "buffer_capacity: must be positive");
  require(learning_rate > 0.0, "learning_rate: must be positive");
  require(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0,
          "epsilon: start and end must lie in [0, 1]");
  require(ensemble_size >= 1, "ensemble_size: must be >= 1");
  require(kappa >= 0.0, "kappa: must be >= 0");
  require(beta >= 0.0, "beta: must be >= 0");
  require(cql_alpha >= 0.0, "cql_alpha: must be >= 0");
  for (int h : hidden) require(h > 0, "hidden: layer widths must be positive");
  require(bias_rollouts > 0, "bias_rollouts: must be positive");
}

std::size_t BatchTargetReport::online_count() const {
  return static_cast<std::size_t>(std::count(online_selected.begin(), online_selected.end(), 1));
}

std::size_t BatchTargetReport::attributed_count() const {
  return static_cast<std::size_t>(
      std::count_if(online_selected.begin(), online_selected.end(), [](std::int8_t f) { return f >= 0; }));
}

namespace {

void check_finite(const nn::Matrix& m, const nn::Mlp& net, const char* which) {
  for (double v : m.data) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "compute_targets: non-finite " << which << " network output (param l2 norm "
         << nn::l2_norm(net.params()) << ", " << net.param_count() << " params)";
      throw NumericError(os.str());
    }
  }
}

bool uses_combiner(LearnerKind kind) { return kind == LearnerKind::dqn_combiner || kind == LearnerKind::cql; }

}  // namespace

BatchTargetReport compute_targets(const TrainerConfig& config, Combiner& combiner, const nn::Mlp& online,
                                  std::span<const nn::Mlp* const> targets, const Batch& batch) {
  require(!targets.empty(), "compute_targets: no target network");
  require(config.kind == LearnerKind::maxmin_dqn || targets.size() == 1,
          "compute_targets: multiple target networks are only used by maxmin_dqn");
  const std::size_t n = batch.size();
  const auto na = static_cast<std::size_t>(online.output_size());
  for (const auto* t : targets) {
    require(t->layer_sizes() == online.layer_sizes(), "compute_targets: target and online shapes differ");
  }

  const bool need_online = config.kind != LearnerKind::maxmin_dqn &&
                           !(uses_combiner(config.kind) && combiner.kind() == CombinerKind::target_only);
  nn::Matrix q_online;
  if (need_online) {
    nn::forward(online, batch.next_obs, q_online);
    check_finite(q_online, online, "online");
  }
  std::vector<nn::Matrix> q_target(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    nn::forward(*targets[i], batch.next_obs, q_target[i]);
    check_finite(q_target[i], *targets[i], "target");
  }

  BatchTargetReport report;
  report.targets.resize(n);
  report.greedy_action.assign(n, -1);
  report.online_selected.assign(n, -1);
  report.attributable = uses_combiner(config.kind) && combiner.attributable();
  std::vector<double> merged(na);

  for (std::size_t b = 0; b < n; ++b) {
    const double r = batch.rewards[b];
    if (batch.terminal[b]) {
      report.targets[b] = r;
      continue;
    }
    const auto tg = q_target[0].row(b);
    int best = 0;
    double next_value = 0.0;
    switch (config.kind) {
      case LearnerKind::dqn_combiner:
      case LearnerKind::cql: {
        if (combiner.kind() == CombinerKind::target_only) {
          std::copy(tg.begin(), tg.end(), merged.begin());
        } else {
          combiner.combine_into(tg, q_online.row(b), merged);
        }
        best = argmax(merged);
        next_value = merged[best];
        if (report.attributable) {
          report.online_selected[b] = combiner.last_source(static_cast<std::size_t>(best)) == Source::online ? 1 : 0;
        }
        break;
      }
      case LearnerKind::double_dqn:
        best = argmax(q_online.row(b));
        next_value = tg[best];
        break;
      case LearnerKind::maxmin_dqn:
        for (std::size_t a = 0; a < na; ++a) {
          double v = tg[a];
          for (std::size_t i = 1; i < q_target.size(); ++i) v = std::min(v, q_target[i](b, a));
          merged[a] = v;
        }
        best = argmax(merged);
        next_value = merged[best];
        break;
      case LearnerKind::fr_dqn:
        best = argmax(q_online.row(b));
        next_value = q_online(b, static_cast<std::size_t>(best));
        break;
      case LearnerKind::sc_dqn: {
        const auto on = q_online.row(b);
        for (std::size_t a = 0; a < na; ++a) merged[a] = on[a] - config.beta * (on[a] - tg[a]);
        best = argmax(merged);
        next_value = tg[best];
        break;
      }
    }
    report.greedy_action[b] = best;
    report.targets[b] = r + config.gamma * next_value;
  }
  return report;
}

double td_loss(const nn::Matrix& q_online, std::span<const int> actions, std::span<const double> targets, bool huber,
               nn::Matrix& dout) {
  const std::size_t n = q_online.rows;
  require(actions.size() == n && targets.size() == n && n > 0, "td_loss: batch size mismatch");
  const double inv = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const auto a = static_cast<std::size_t>(actions[b]);
    const double res = targets[b] - q_online(b, a);
    if (huber && std::abs(res) > 1.0) {
      loss += std::abs(res) - 0.5;
      dout(b, a) += -(res > 0.0 ? 1.0 : -1.0) * inv;
    } else {
      loss += 0.5 * res * res;
      dout(b, a) += -res * inv;
    }
  }
  return loss * inv;
}

double add_fr_penalty(const nn::Matrix& q_online, const nn::Matrix& q_target, std::span<const int> actions,
                      double kappa, nn::Matrix& dout) {
  const std::size_t n = q_online.rows;
  const double inv = 1.0 / static_cast<double>(n);
  double penalty = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const auto a = static_cast<std::size_t>(actions[b]);
    const double d = q_online(b, a) - q_target(b, a);
    penalty += d * d;
    dout(b, a) += 2.0 * kappa * d * inv;
  }
  return kappa * penalty * inv;
}

double add_cql_penalty(const nn::Matrix& q_online, std::span<const int> actions, double alpha, nn::Matrix& dout) {
  const std::size_t n = q_online.rows;
  const std::size_t na = q_online.cols;
  const double inv = 1.0 / static_cast<double>(n);
  double penalty = 0.0;
  std::vector<double> w(na);
  for (std::size_t b = 0; b < n; ++b) {
    const auto row = q_online.row(b);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t k = 0; k < na; ++k) {
      w[k] = std::exp(row[k] - m);
      z += w[k];
    }
    const double lse = m + std::log(z);
    const auto a = static_cast<std::size_t>(actions[b]);
    penalty += lse - row[a];
    for (std::size_t k = 0; k < na; ++k) dout(b, k) += alpha * inv * (w[k] / z - (k == a ? 1.0 : 0.0));
  }
  return alpha * penalty * inv;
}

Penalty fr_regularizer(const nn::Mlp& online, const nn::Mlp& target, const Batch& batch, double kappa) {
  require(kappa >= 0.0, "fr_regularizer: kappa must be >= 0");
  nn::ForwardCache cache;
  const nn::Matrix q = nn::forward(online, batch.obs, &cache);
  const nn::Matrix qt = nn::forward(target, batch.obs);
  nn::Matrix dout(q.rows, q.cols);
  Penalty p;
  p.value = add_fr_penalty(q, qt, batch.actions, kappa, dout);
  p.gradient = nn::backprop(online, cache, dout);
  return p;
}

Penalty cql_regularizer(const nn::Mlp& online, const Batch& batch, double alpha) {
  nn::ForwardCache cache;
  const nn::Matrix q = nn::forward(online, batch.obs, &cache);
  nn::Matrix dout(q.rows, q.cols);
  Penalty p;
  p.value = add_cql_penalty(q, batch.actions, alpha, dout);
  p.gradient = nn::backprop(online, cache, dout);
  return p;
}

std::vector<double> online_selection_ratio(std::span<const SelectionRecord> records, long sync_period) {
  require(sync_period > 0, "online_selection_ratio: sync period must be positive");
  std::vector<double> online;
  std::vector<double> total;
  for (const auto& r : records) {
    const auto k = static_cast<std::size_t>(r.update / sync_period);
    if (online.size() <= k) {
      online.resize(k + 1, 0.0);
      total.resize(k + 1, 0.0);
    }
    online[k] += static_cast<double>(r.online);
    total[k] += static_cast<double>(r.total);
  }
  std::vector<double> out(online.size(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = total[k] > 0.0 ? online[k] / total[k] : 0.0;
  return out;
}

std::vector<double> online_selection_ratio(std::span<const BatchTargetReport> reports, long sync_period) {
  std::vector<SelectionRecord> records;
  records.reserve(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].attributable) {
      throw ContractError("online_selection_ratio: reports come from a combiner without source attribution");
    }
    records.push_back({static_cast<long>(i), reports[i].online_count(), reports[i].attributed_count()});
  }
  return online_selection_ratio(records, sync_period);
}

// ---------------------------------------------------------------------------

namespace {

Combiner make_combiner(const TrainerConfig& config, std::uint64_t seed) {
  if (config.combiner == CombinerKind::random) {
    return Combiner(config.combiner, RngStream(seed, StreamId::combiner), config.random_granularity);
  }
  return Combiner(config.combiner);
}

}  // namespace

Trainer::Trainer(TrainerConfig config, std::unique_ptr<Environment> env, std::uint64_t seed)
    : config_(std::move(config)),
      env_(std::move(env)),
      seed_(seed),
      env_rng_(seed, StreamId::environment),
      explore_rng_(seed, StreamId::exploration),
      buffer_rng_(seed, StreamId::buffer),
      learner_rng_(seed, StreamId::learner),
      combiner_(make_combiner(config_, seed)),
      buffer_(config_.buffer_capacity, static_cast<std::size_t>(env_->observation_size())) {
  config_.validate();
  require(config_.kind != LearnerKind::cql, "Trainer: cql trains offline; pass a dataset");
  init_networks();
}

Trainer::Trainer(TrainerConfig config, std::unique_ptr<Environment> env, ReplayBuffer dataset, std::uint64_t seed)
    : config_(std::move(config)),
      env_(std::move(env)),
      offline_(true),
      seed_(seed),
      env_rng_(seed, StreamId::environment),
      explore_rng_(seed, StreamId::exploration),
      buffer_rng_(seed, StreamId::buffer),
      learner_rng_(seed, StreamId::learner),
      combiner_(make_combiner(config_, seed)),
      buffer_(std::move(dataset)) {
  config_.validate();
  if (buffer_.size() == 0) throw ContractError("Trainer: offline dataset is empty");
  require(buffer_.obs_dim() == static_cast<std::size_t>(env_->observation_size()),
          "Trainer: dataset observation width does not match the environment");
  init_networks();
}

void Trainer::init_networks() {
  std::vector<int> sizes;
  sizes.push_back(env_->observation_size());
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(env_->n_actions());
  const std::size_t members = config_.kind == LearnerKind::maxmin_dqn ? static_cast<std::size_t>(config_.ensemble_size) : 1;
  for (std::size_t i = 0; i < members; ++i) {
    RngStream init(seed_, StreamId::init, i);
    online_.push_back(nn::Mlp::initialized(sizes, config_.activation, init));
    target_.push_back(nn::make_target(online_.back()));
    adam_.emplace_back(online_.back().param_count(), config_.learning_rate, config_.adam_eps);
  }
  obs_.assign(static_cast<std::size_t>(env_->observation_size()), 0.0);
  next_obs_ = obs_;
}

std::vector<const nn::Mlp*> Trainer::target_ptrs() const {
  std::vector<const nn::Mlp*> out;
  for (const auto& t : target_) out.push_back(&t.params);
  return out;
}

std::vector<double> Trainer::action_values(std::span<const double> obs) const {
  std::vector<double> q = nn::forward(online_[0], obs);
  for (std::size_t i = 1; i < online_.size(); ++i) {
    const auto qi = nn::forward(online_[i], obs);
    for (std::size_t a = 0; a < q.size(); ++a) q[a] = std::min(q[a], qi[a]);
  }
  return q;
}

int Trainer::greedy_action(std::span<const double> obs) const { return argmax(action_values(obs)); }

std::optional<TrainStepResult> Trainer::env_step() {
  require(!offline_, "env_step: trainer is in offline mode");
  if (episode_t_ == 0) env_->reset(env_rng_, obs_);
  const double eps = config_.epsilon.value(env_steps_);
  int action;
  if (explore_rng_.uniform() < eps) {
    action = static_cast<int>(explore_rng_.uniform_int(static_cast<std::uint64_t>(env_->n_actions())));
  } else {
    action = greedy_action(obs_);
  }
  const EnvFeedback fb = env_->step(action, env_rng_, next_obs_);
  ++episode_t_;
  ++env_steps_;
  buffer_.push(obs_, action, fb.reward, next_obs_, fb.terminal);
  if (fb.terminal || episode_t_ >= env_->max_episode_steps()) {
    episode_t_ = 0;
  } else {
    std::swap(obs_, next_obs_);
  }
  if (static_cast<long>(buffer_.size()) >= config_.initial_samples && env_steps_ % config_.data_to_update == 0) {
    return update();
  }
  return std::nullopt;
}

TrainStepResult Trainer::update() {
  const Batch batch = buffer_.sample(static_cast<std::size_t>(config_.batch_size), buffer_rng_);
  return train_on_batch(batch);
}

TrainStepResult Trainer::train_on_batch(const Batch& batch) {
  require(batch.size() > 0, "train_on_batch: empty batch");
  std::size_t member = 0;
  if (config_.kind == LearnerKind::maxmin_dqn) member = static_cast<std::size_t>(learner_rng_.uniform_int(online_.size()));
  const auto targets = target_ptrs();
  const BatchTargetReport report = compute_targets(config_, combiner_, online_[member], targets, batch);

  nn::Mlp& net = online_[member];
  nn::ForwardCache cache;
  const nn::Matrix q = nn::forward(net, batch.obs, &cache);
  nn::Matrix dout(q.rows, q.cols);
  TrainStepResult result;
  result.td_loss = td_loss(q, batch.actions, report.targets, config_.huber, dout);
  if (config_.kind == LearnerKind::fr_dqn && config_.kappa != 0.0) {
    const nn::Matrix qt = nn::forward(target_[member].params, batch.obs);
    result.penalty = add_fr_penalty(q, qt, batch.actions, config_.kappa, dout);
  } else if (config_.kind == LearnerKind::cql && config_.cql_alpha != 0.0) {
    result.penalty = add_cql_penalty(q, batch.actions, config_.cql_alpha, dout);
  }
  result.loss = result.td_loss + result.penalty;
  if (!std::isfinite(result.loss)) throw NumericError("train_on_batch: non-finite loss");
  const auto grad = nn::backprop(net, cache, dout);
  nn::adam_step(net, grad, adam_[member]);

  if (report.attributable) {
    const SelectionRecord rec{updates_, report.online_count(), report.attributed_count()};
    selections_.push_back(rec);
    if (rec.total > 0) result.selection_ratio = static_cast<double>(rec.online) / static_cast<double>(rec.total);
  }
  ++updates_;
  if (updates_ % config_.target_period == 0) {
    for (std::size_t i = 0; i < online_.size(); ++i) nn::sync_target(online_[i], target_[i], updates_);
    ++syncs_;
  }
  losses_.push_back(result.loss);
  return result;
}

std::vector<double> Trainer::loss_gradient(const Batch& batch, std::size_t member) const {
  Combiner combiner = combiner_;
  const auto targets = target_ptrs();
  const BatchTargetReport report = compute_targets(config_, combiner, online_.at(member), targets, batch);
  const nn::Mlp& net = online_[member];
  nn::ForwardCache cache;
  const nn::Matrix q = nn::forward(net, batch.obs, &cache);
  nn::Matrix dout(q.rows, q.cols);
  td_loss(q, batch.actions, report.targets, config_.huber, dout);
  if (config_.kind == LearnerKind::fr_dqn && config_.kappa != 0.0) {
    add_fr_penalty(q, nn::forward(target_[member].params, batch.obs), batch.actions, config_.kappa, dout);
  } else if (config_.kind == LearnerKind::cql && config_.cql_alpha != 0.0) {
    add_cql_penalty(q, batch.actions, config_.cql_alpha, dout);
  }
  return nn::backprop(net, cache, dout);
}

double Trainer::frozen_target_loss(const nn::Mlp& params, const Batch& batch, std::span<const double> frozen_targets,
                                   std::size_t member) const {
  const nn::Matrix q = nn::forward(params, batch.obs);
  nn::Matrix dout(q.rows, q.cols);
  double loss = td_loss(q, batch.actions, frozen_targets, config_.huber, dout);
  if (config_.kind == LearnerKind::fr_dqn && config_.kappa != 0.0) {
    loss += add_fr_penalty(q, nn::forward(target_.at(member).params, batch.obs), batch.actions, config_.kappa, dout);
  } else if (config_.kind == LearnerKind::cql && config_.cql_alpha != 0.0) {
    loss += add_cql_penalty(q, batch.actions, config_.cql_alpha, dout);
  }
  return loss;
}

double Trainer::evaluate(int episodes, RngStream& rng) const {
  require(episodes > 0, "evaluate: episodes must be positive");
  auto env = env_->clone();
  const auto policy = [this](std::span<const double> obs, RngStream&) { return greedy_action(obs); };
  return rollout_return(*env, policy, episodes, rng);
}

double Trainer::bias_estimate(int rollouts, RngStream& rng) const {
  require(rollouts > 0, "bias_estimate: rollouts must be positive");
  auto env = env_->clone();
  std::vector<double> obs(static_cast<std::size_t>(env->observation_size()));
  double predicted = 0.0;
  double realized = 0.0;
  for (int k = 0; k < rollouts; ++k) {
    env->reset(rng, obs);
    predicted += max_value(action_values(obs));
    double discount = 1.0;
    double ret = 0.0;
    for (int t = 0; t < env->max_episode_steps(); ++t) {
      const auto fb = env->step(greedy_action(obs), rng, obs);
      ret += discount * fb.reward;
      discount *= config_.gamma;
      if (fb.terminal) break;
    }
    realized += ret;
  }
  return (predicted - realized) / rollouts;
}

std::vector<EpochRow> Trainer::run(int epochs, long steps_per_epoch, int eval_episodes) {
  require(epochs > 0 && steps_per_epoch > 0 && eval_episodes > 0, "Trainer::run: counts must be positive");
  std::vector<EpochRow> rows;
  const bool attributable = uses_combiner(config_.kind) && combiner_.attributable();
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t loss_begin = losses_.size();
    const std::size_t sel_begin = selections_.size();
    for (long k = 0; k < steps_per_epoch; ++k) {
      if (offline_) {
        update();
      } else {
        env_step();
      }
    }
    EpochRow row;
    row.epoch = epoch;
    row.env_steps = env_steps_;
    row.gradient_steps = updates_;
    const std::size_t n_losses = losses_.size() - loss_begin;
    double loss_sum = 0.0;
    for (std::size_t i = loss_begin; i < losses_.size(); ++i) loss_sum += losses_[i];
    row.loss_mean = n_losses > 0 ? loss_sum / static_cast<double>(n_losses) : 0.0;
    if (attributable) {
      double on = 0.0;
      double tot = 0.0;
      for (std::size_t i = sel_begin; i < selections_.size(); ++i) {
        on += static_cast<double>(selections_[i].online);
        tot += static_cast<double>(selections_[i].total);
      }
      row.online_selection_ratio = tot > 0.0 ? on / tot : 0.0;
    }
    RngStream eval_rng(seed_, StreamId::evaluation, static_cast<std::uint64_t>(epoch));
    row.eval_return = evaluate(eval_episodes, eval_rng);
    if (config_.track_bias) {
      RngStream bias_rng(seed_, StreamId::evaluation, 1'000'000 + static_cast<std::uint64_t>(epoch));
      row.bias_estimate = bias_estimate(config_.bias_rollouts, bias_rng);
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace minto::deep

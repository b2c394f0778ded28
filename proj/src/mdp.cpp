#include "minto/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <string>

#include "minto/error.hpp"

namespace minto {

QTable::QTable(int n_states, int n_actions, double init)
    : n_states_(n_states),
      n_actions_(n_actions),
      q_(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions), init) {
  require(n_states > 0 && n_actions > 0, "QTable: dimensions must be positive");
}

ActionId argmax(std::span<const double> values) {
  require(!values.empty(), "argmax: empty vector");
  ActionId best = 0;
  for (std::size_t a = 1; a < values.size(); ++a) {
    if (values[a] > values[best]) best = static_cast<ActionId>(a);
  }
  return best;
}

double max_value(std::span<const double> values) { return values[argmax(values)]; }

TabularMdp::TabularMdp(int n_states, int n_actions, std::vector<double> transition, std::vector<double> reward,
                       double gamma, std::vector<double> initial_dist, std::vector<bool> terminal)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      initial_dist_(std::move(initial_dist)),
      terminal_(std::move(terminal)) {
  require(n_states_ > 0, "TabularMdp: n_states must be positive");
  require(n_actions_ > 0, "TabularMdp: n_actions must be positive");
  const auto ns = static_cast<std::size_t>(n_states_);
  const auto na = static_cast<std::size_t>(n_actions_);
  require(transition_.size() == ns * na * ns, "TabularMdp: transition tensor has wrong size");
  require(reward_.size() == ns * na, "TabularMdp: reward table has wrong size");
  require(initial_dist_.size() == ns, "TabularMdp: initial_dist has wrong size");
  require(terminal_.size() == ns, "TabularMdp: terminal mask has wrong size");
  require(gamma_ >= 0.0 && gamma_ < 1.0, "TabularMdp: gamma must lie in [0, 1)");
  for (std::size_t sa = 0; sa < ns * na; ++sa) {
    double total = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
      const double p = transition_[sa * ns + k];
      require(std::isfinite(p) && p >= 0.0, "TabularMdp: transition probabilities must be finite and >= 0");
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9,
            "TabularMdp: transition row " + std::to_string(sa / na) + "," + std::to_string(sa % na) +
                " sums to " + std::to_string(total));
    require(std::isfinite(reward_[sa]), "TabularMdp: rewards must be finite");
  }
  double mu = 0.0;
  for (double p : initial_dist_) {
    require(std::isfinite(p) && p >= 0.0, "TabularMdp: initial_dist entries must be >= 0");
    mu += p;
  }
  require(std::abs(mu - 1.0) <= 1e-9, "TabularMdp: initial_dist must sum to 1");
}

std::span<const double> TabularMdp::transition_row(StateId s, ActionId a) const {
  const auto ns = static_cast<std::size_t>(n_states_);
  return {transition_.data() + idx(s, a) * ns, ns};
}

TabularMdp TabularMdp::with_reward(StateId s, ActionId a, double value) const {
  auto r = reward_;
  r[idx(s, a)] = value;
  return {n_states_, n_actions_, transition_, std::move(r), gamma_, initial_dist_, terminal_};
}

TabularMdp TabularMdp::with_gamma(double gamma) const {
  return {n_states_, n_actions_, transition_, reward_, gamma, initial_dist_, terminal_};
}

QTable bellman_backup(const TabularMdp& mdp, const QTable& q) {
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  std::vector<double> v(static_cast<std::size_t>(ns));
  for (StateId s = 0; s < ns; ++s) v[s] = mdp.terminal(s) ? 0.0 : max_value(q.row(s));
  QTable out(ns, na);
  for (StateId s = 0; s < ns; ++s) {
    for (ActionId a = 0; a < na; ++a) {
      double future = 0.0;
      if (!mdp.terminal(s)) {
        const auto row = mdp.transition_row(s, a);
        for (StateId k = 0; k < ns; ++k) future += row[k] * v[k];
      }
      out.at(s, a) = mdp.reward(s, a) + mdp.gamma() * future;
    }
  }
  return out;
}

QTable value_iteration(const TabularMdp& mdp, double tol) {
  require(tol > 0.0, "value_iteration: tol must be positive");
  QTable q(mdp.n_states(), mdp.n_actions());
  for (long sweep = 0; sweep < kMaxValueIterationSweeps; ++sweep) {
    QTable next = bellman_backup(mdp, q);
    double delta = 0.0;
    const auto a = next.values();
    const auto b = q.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = std::abs(a[i] - b[i]);
      if (!std::isfinite(a[i])) throw NumericError("value_iteration: non-finite value encountered");
      delta = std::max(delta, d);
    }
    q = std::move(next);
    // residual(q_new) <= gamma * delta <= delta
    if (delta <= tol) return q;
  }
  throw NumericError("value_iteration: no convergence after 10^6 sweeps");
}

Transition step(const TabularMdp& mdp, StateId state, ActionId action, RngStream& rng) {
  require(state >= 0 && state < mdp.n_states(), "step: state out of range");
  require(action >= 0 && action < mdp.n_actions(), "step: action out of range");
  require(!mdp.terminal(state), "step: cannot step from a terminal state");
  const auto next = static_cast<StateId>(rng.categorical(mdp.transition_row(state, action)));
  return {state, action, mdp.reward(state, action), next, mdp.terminal(next)};
}

StateId reset(const TabularMdp& mdp, RngStream& rng) {
  return static_cast<StateId>(rng.categorical(mdp.initial_dist()));
}

void to_json(nlohmann::json& j, const TabularMdp& mdp) {
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  nlohmann::json transition = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  for (StateId s = 0; s < ns; ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    nlohmann::json r_row = nlohmann::json::array();
    for (ActionId a = 0; a < na; ++a) {
      const auto row = mdp.transition_row(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
      r_row.push_back(mdp.reward(s, a));
    }
    transition.push_back(std::move(per_action));
    reward.push_back(std::move(r_row));
  }
  std::vector<bool> terminal(static_cast<std::size_t>(ns));
  for (StateId s = 0; s < ns; ++s) terminal[s] = mdp.terminal(s);
  const auto mu = mdp.initial_dist();
  j = nlohmann::json{{"n_states", ns},
                     {"n_actions", na},
                     {"gamma", mdp.gamma()},
                     {"transition", std::move(transition)},
                     {"reward", std::move(reward)},
                     {"initial_dist", std::vector<double>(mu.begin(), mu.end())},
                     {"terminal", terminal}};
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
  const int ns = j.at("n_states").get<int>();
  const int na = j.at("n_actions").get<int>();
  require(ns > 0 && na > 0, "mdp json: n_states and n_actions must be positive");
  std::vector<double> transition;
  std::vector<double> reward;
  transition.reserve(static_cast<std::size_t>(ns) * na * ns);
  const auto& t = j.at("transition");
  const auto& r = j.at("reward");
  require(t.size() == static_cast<std::size_t>(ns) && r.size() == static_cast<std::size_t>(ns),
          "mdp json: transition/reward must have n_states rows");
  for (int s = 0; s < ns; ++s) {
    require(t[s].size() == static_cast<std::size_t>(na) && r[s].size() == static_cast<std::size_t>(na),
            "mdp json: each row must have n_actions entries");
    for (int a = 0; a < na; ++a) {
      const auto row = t[s][a].get<std::vector<double>>();
      require(row.size() == static_cast<std::size_t>(ns), "mdp json: transition rows must have n_states entries");
      transition.insert(transition.end(), row.begin(), row.end());
      reward.push_back(r[s][a].get<double>());
    }
  }
  return {ns,
          na,
          std::move(transition),
          std::move(reward),
          j.at("gamma").get<double>(),
          j.at("initial_dist").get<std::vector<double>>(),
          j.at("terminal").get<std::vector<bool>>()};
}

}  // namespace minto

#include "minto/envs.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "minto/error.hpp"

namespace minto {
namespace {

Cell move(Cell c, int direction) {
  switch (direction) {
    case 0: return {c.x, c.y + 1};
    case 1: return {c.x, c.y - 1};
    case 2: return {c.x - 1, c.y};
    default: return {c.x + 1, c.y};
  }
}

}  // namespace

StateId GridWorld::state_of(Cell c) const {
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (cells[s] == c) return static_cast<StateId>(s);
  }
  throw ContractError("gridworld: cell is a wall or outside the grid");
}

GridWorld build_gridworld(const GridWorldSpec& spec) {
  require(spec.width > 0 && spec.height > 0, "gridworld: width and height must be positive");
  require(spec.slip_prob >= 0.0 && spec.slip_prob < 1.0, "gridworld: slip_prob must lie in [0, 1)");
  const auto inside = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < spec.width && c.y < spec.height; };
  require(inside(spec.goal), "gridworld: goal outside the grid");
  require(!spec.walls.contains(spec.goal), "gridworld: goal inside a wall");

  std::vector<Cell> cells;
  std::map<Cell, StateId> index;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Cell c{x, y};
      if (spec.walls.contains(c)) continue;
      index[c] = static_cast<StateId>(cells.size());
      cells.push_back(c);
    }
  }
  const int ns = static_cast<int>(cells.size());
  const int na = 4;
  const StateId goal = index.at(spec.goal);

  std::vector<double> transition(static_cast<std::size_t>(ns) * na * ns, 0.0);
  std::vector<double> reward(static_cast<std::size_t>(ns) * na, 0.0);
  std::vector<bool> terminal(static_cast<std::size_t>(ns), false);
  terminal[goal] = true;

  for (StateId s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      double* row = transition.data() + (static_cast<std::size_t>(s) * na + a) * ns;
      if (s == goal) {
        row[s] = 1.0;  // absorbing
        continue;
      }
      for (int d = 0; d < na; ++d) {
        const double p = d == a ? 1.0 - spec.slip_prob : spec.slip_prob / 3.0;
        if (p == 0.0) continue;
        Cell next = move(cells[s], d);
        if (!inside(next) || spec.walls.contains(next)) next = cells[s];
        row[index.at(next)] += p;
      }
      reward[static_cast<std::size_t>(s) * na + a] = spec.step_reward + row[goal] * spec.goal_reward;
    }
  }

  std::vector<double> mu(static_cast<std::size_t>(ns), 0.0);
  if (spec.start) {
    require(inside(*spec.start) && !spec.walls.contains(*spec.start), "gridworld: start must be a free cell");
    require(*spec.start != spec.goal, "gridworld: start must differ from goal");
    mu[index.at(*spec.start)] = 1.0;
  } else {
    for (StateId s = 0; s < ns; ++s) {
      if (s != goal) mu[s] = 1.0 / (ns - 1);
    }
    if (ns == 1) mu[goal] = 1.0;
  }

  // Reachability: breadth-first search from every start state over successor support.
  std::vector<bool> seen(static_cast<std::size_t>(ns), false);
  std::deque<StateId> frontier;
  for (StateId s = 0; s < ns; ++s) {
    if (mu[s] > 0.0) {
      seen[s] = true;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    if (terminal[s]) continue;
    for (int a = 0; a < na; ++a) {
      const double* row = transition.data() + (static_cast<std::size_t>(s) * na + a) * ns;
      for (StateId k = 0; k < ns; ++k) {
        if (row[k] > 0.0 && !seen[k]) {
          seen[k] = true;
          frontier.push_back(k);
        }
      }
    }
  }

  GridWorld out{TabularMdp(ns, na, std::move(transition), std::move(reward), spec.gamma, std::move(mu), terminal),
                std::move(cells), seen[goal], {}};
  if (!out.goal_reachable) out.warnings.emplace_back("goal is unreachable from the start distribution");
  return out;
}

TabularMdp build_garnet(const GarnetSpec& spec) {
  require(spec.n_states > 0 && spec.n_actions > 0, "garnet: sizes must be positive");
  require(spec.branching_factor >= 1 && spec.branching_factor <= spec.n_states,
          "garnet: branching_factor must lie in [1, n_states]");
  require(spec.reward_sparsity > 0.0 && spec.reward_sparsity <= 1.0, "garnet: reward_sparsity must lie in (0, 1]");
  RngStream rng(spec.seed, StreamId::environment, 0xA11E7);
  const int ns = spec.n_states;
  const int na = spec.n_actions;
  std::vector<double> transition(static_cast<std::size_t>(ns) * na * ns, 0.0);
  std::vector<double> reward(static_cast<std::size_t>(ns) * na, 0.0);
  std::vector<int> perm(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      std::iota(perm.begin(), perm.end(), 0);
      // Partial Fisher-Yates selects branching_factor distinct successors.
      for (int i = 0; i < spec.branching_factor; ++i) {
        const auto j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ns - i)));
        std::swap(perm[i], perm[j]);
      }
      std::vector<double> weights(static_cast<std::size_t>(spec.branching_factor));
      double total = 0.0;
      for (auto& w : weights) {
        w = -std::log(1.0 - rng.uniform());  // Exp(1); normalized gives Dirichlet(1, ..., 1)
        if (w <= 0.0) w = 1e-300;
        total += w;
      }
      double* row = transition.data() + (static_cast<std::size_t>(s) * na + a) * ns;
      for (int i = 0; i < spec.branching_factor; ++i) row[perm[i]] = weights[i] / total;
      const bool rewarded = rng.uniform() < spec.reward_sparsity;
      const double magnitude = 1.0 - rng.uniform();
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      if (rewarded) reward[static_cast<std::size_t>(s) * na + a] = sign * magnitude;
    }
  }
  std::vector<double> mu(static_cast<std::size_t>(ns), 1.0 / ns);
  return {ns, na, std::move(transition), std::move(reward), spec.gamma, std::move(mu),
          std::vector<bool>(static_cast<std::size_t>(ns), false)};
}

Transition NoisyRewardMdp::step(StateId state, ActionId action, RngStream& rng) const {
  Transition t = minto::step(base, state, action, rng);
  const bool noisy = noisy_states.empty() || noisy_states.at(static_cast<std::size_t>(state));
  if (noise_std > 0.0 && noisy) t.reward += rng.normal(0.0, noise_std);
  return t;
}

NoisyRewardMdp build_overestimation_mdp(const OverestimationSpec& spec) {
  require(spec.n_noisy_actions >= 2, "overestimation mdp: need at least two noisy actions");
  require(spec.noise_std >= 0.0, "overestimation mdp: noise_std must be >= 0");
  require(spec.chain_length >= 1, "overestimation mdp: chain_length must be >= 1");
  const int ns = spec.chain_length + 2;
  const int na = spec.n_noisy_actions;
  const StateId probe = 0, sink = ns - 1;
  std::vector<double> transition(static_cast<std::size_t>(ns) * na * ns, 0.0);
  std::vector<double> reward(static_cast<std::size_t>(ns) * na, 0.0);
  const auto at = [&](StateId s, int a, StateId k) -> double& {
    return transition[(static_cast<std::size_t>(s) * na + a) * ns + k];
  };
  // Probe: action 0 stops, action 1 enters the chain; remaining actions
  // duplicate "stop" so the action space stays rectangular.
  for (int a = 0; a < na; ++a) at(probe, a, a == 1 ? 1 : sink) = 1.0;
  for (StateId s = 1; s < sink; ++s) {
    for (int a = 0; a < na; ++a) {
      at(s, a, s + 1) = 1.0;
      reward[static_cast<std::size_t>(s) * na + a] = spec.noisy_mean;
    }
  }
  for (int a = 0; a < na; ++a) at(sink, a, sink) = 1.0;
  std::vector<double> mu(static_cast<std::size_t>(ns), 0.0);
  mu[probe] = 1.0;
  std::vector<bool> terminal(static_cast<std::size_t>(ns), false);
  terminal[sink] = true;
  std::vector<bool> noisy(static_cast<std::size_t>(ns), true);
  noisy[probe] = false;
  noisy[sink] = false;
  return {TabularMdp(ns, na, std::move(transition), std::move(reward), spec.gamma, std::move(mu), std::move(terminal)),
          spec.noise_std, std::move(noisy)};
}

std::string fingerprint(const TabularMdp& mdp) {
  nlohmann::json j = mdp;
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

OfflineDataset generate_offline_dataset(const TabularMdp& mdp, const BehaviorPolicy& policy,
                                        std::size_t n_transitions, RngStream& rng, int max_episode_steps) {
  require(n_transitions > 0, "generate_offline_dataset: n_transitions must be positive");
  require(policy.epsilon >= 0.0 && policy.epsilon <= 1.0, "generate_offline_dataset: epsilon must lie in [0, 1]");
  require(policy.q.n_states() == mdp.n_states() && policy.q.n_actions() == mdp.n_actions(),
          "generate_offline_dataset: behavior Q-table shape mismatch");
  OfflineDataset out;
  out.behavior_policy_label = policy.label;
  out.env_fingerprint = fingerprint(mdp);
  out.transitions.reserve(n_transitions);
  StateId s = reset(mdp, rng);
  int t = 0;
  while (out.transitions.size() < n_transitions) {
    ActionId a;
    if (rng.uniform() < policy.epsilon) {
      a = static_cast<ActionId>(rng.uniform_int(static_cast<std::uint64_t>(mdp.n_actions())));
    } else {
      a = argmax(policy.q.row(s));
    }
    const Transition tr = step(mdp, s, a, rng);
    out.transitions.push_back(tr);
    ++t;
    if (tr.terminal || t >= max_episode_steps) {
      s = reset(mdp, rng);
      t = 0;
    } else {
      s = tr.next_state;
    }
  }
  return out;
}

void write_dataset(const OfflineDataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_dataset: cannot open " + path.string());
  nlohmann::json header{{"env_fingerprint", dataset.env_fingerprint},
                        {"behavior_policy_label", dataset.behavior_policy_label},
                        {"count", dataset.transitions.size()}};
  os << header.dump() << '\n';
  for (const auto& t : dataset.transitions) {
    nlohmann::json rec{{"s", t.state}, {"a", t.action}, {"r", t.reward}, {"s'", t.next_state}, {"t", t.terminal}};
    os << rec.dump() << '\n';
  }
}

OfflineDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_dataset: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_dataset: missing header");
  const auto header = nlohmann::json::parse(line);
  OfflineDataset out;
  out.env_fingerprint = header.at("env_fingerprint").get<std::string>();
  out.behavior_policy_label = header.at("behavior_policy_label").get<std::string>();
  const auto count = header.at("count").get<std::size_t>();
  out.transitions.reserve(count);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    out.transitions.push_back({rec.at("s").get<int>(), rec.at("a").get<int>(), rec.at("r").get<double>(),
                               rec.at("s'").get<int>(), rec.at("t").get<bool>()});
  }
  if (out.transitions.size() != count) throw std::runtime_error("read_dataset: record count does not match header");
  if (out.transitions.empty()) throw std::runtime_error("read_dataset: dataset is empty");
  return out;
}

void check_dataset(const OfflineDataset& dataset, const TabularMdp& mdp) {
  require(!dataset.transitions.empty(), "dataset: empty");
  require(dataset.env_fingerprint == fingerprint(mdp), "dataset: environment fingerprint mismatch");
  for (const auto& t : dataset.transitions) {
    require(t.state >= 0 && t.state < mdp.n_states() && t.next_state >= 0 && t.next_state < mdp.n_states(),
            "dataset: state id out of range");
    require(t.action >= 0 && t.action < mdp.n_actions(), "dataset: action id out of range");
  }
}

std::vector<std::size_t> coverage_counts(const OfflineDataset& dataset, int n_states, int n_actions) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_states) * n_actions, 0);
  for (const auto& t : dataset.transitions) ++counts[static_cast<std::size_t>(t.state) * n_actions + t.action];
  return counts;
}

GridWorldSpec gridworld_spec_from_json(const nlohmann::json& j) {
  GridWorldSpec s;
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  if (j.contains("walls")) {
    for (const auto& w : j.at("walls")) s.walls.insert({w.at(0).get<int>(), w.at(1).get<int>()});
  }
  if (j.contains("goal")) s.goal = {j.at("goal").at(0).get<int>(), j.at("goal").at(1).get<int>()};
  if (j.contains("start")) {
    if (j.at("start").is_null()) {
      s.start.reset();
    } else {
      s.start = Cell{j.at("start").at(0).get<int>(), j.at("start").at(1).get<int>()};
    }
  }
  s.step_reward = j.value("step_reward", s.step_reward);
  s.goal_reward = j.value("goal_reward", s.goal_reward);
  s.slip_prob = j.value("slip_prob", s.slip_prob);
  s.gamma = j.value("gamma", s.gamma);
  return s;
}

void to_json(nlohmann::json& j, const GridWorldSpec& spec) {
  nlohmann::json walls = nlohmann::json::array();
  for (const auto& w : spec.walls) walls.push_back({w.x, w.y});
  j = {{"type", "gridworld"},        {"width", spec.width},
       {"height", spec.height},      {"walls", walls},
       {"goal", {spec.goal.x, spec.goal.y}},
       {"step_reward", spec.step_reward},
       {"goal_reward", spec.goal_reward},
       {"slip_prob", spec.slip_prob}, {"gamma", spec.gamma}};
  j["start"] = spec.start ? nlohmann::json{spec.start->x, spec.start->y} : nlohmann::json(nullptr);
}

GarnetSpec garnet_spec_from_json(const nlohmann::json& j) {
  GarnetSpec s;
  s.n_states = j.value("n_states", s.n_states);
  s.n_actions = j.value("n_actions", s.n_actions);
  s.branching_factor = j.value("branching_factor", s.branching_factor);
  s.reward_sparsity = j.value("reward_sparsity", s.reward_sparsity);
  s.seed = j.value("seed", s.seed);
  s.gamma = j.value("gamma", s.gamma);
  return s;
}

void to_json(nlohmann::json& j, const GarnetSpec& spec) {
  j = {{"type", "garnet"},
       {"n_states", spec.n_states},
       {"n_actions", spec.n_actions},
       {"branching_factor", spec.branching_factor},
       {"reward_sparsity", spec.reward_sparsity},
       {"seed", spec.seed},
       {"gamma", spec.gamma}};
}

OverestimationSpec overestimation_spec_from_json(const nlohmann::json& j) {
  OverestimationSpec s;
  s.n_noisy_actions = j.value("n_noisy_actions", s.n_noisy_actions);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.noisy_mean = j.value("noisy_mean", s.noisy_mean);
  s.gamma = j.value("gamma", s.gamma);
  s.chain_length = j.value("chain_length", s.chain_length);
  return s;
}

void to_json(nlohmann::json& j, const OverestimationSpec& spec) {
  j = {{"type", "noisy"},
       {"n_noisy_actions", spec.n_noisy_actions},
       {"noise_std", spec.noise_std},
       {"noisy_mean", spec.noisy_mean},
       {"gamma", spec.gamma},
       {"chain_length", spec.chain_length}};
}

}  // namespace minto

#include "minto/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "minto/csv.hpp"
#include "minto/error.hpp"
#include "minto/metrics.hpp"
#include "minto/plots.hpp"

#ifndef MINTO_VERSION
#define MINTO_VERSION "unknown"
#endif

namespace minto::runner {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join(const std::string& field, const std::string& key) { return field.empty() ? key : field + "." + key; }
std::string index(const std::string& field, std::size_t i) { return field + "[" + std::to_string(i) + "]"; }

void require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& field) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(join(field, key), "unknown field");
  }
}

long get_int(const json& j, const std::string& key, long def, const std::string& field) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(field, key), "expected an integer");
  return v.get<long>();
}

double get_double(const json& j, const std::string& key, double def, const std::string& field) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(field, key), "expected a number");
  return v.get<double>();
}

bool get_bool(const json& j, const std::string& key, bool def, const std::string& field) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(join(field, key), "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& j, const std::string& key, const std::string& def, const std::string& field) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(join(field, key), "expected a string");
  return v.get<std::string>();
}

void check_name(const std::string& name, const std::string& field) {
  if (name.empty()) throw ConfigError(field, "must not be empty");
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) throw ConfigError(field, "may only contain letters, digits, '_' and '-'");
  }
}

// "gamma: must lie in [0, 1)" -> ("gamma", "must lie in [0, 1)")
ConfigError contract_to_config(const std::string& field, const std::string& what) {
  const auto colon = what.find(": ");
  if (colon != std::string::npos && what.find(' ') > colon) {
    return ConfigError(join(field, what.substr(0, colon)), what.substr(colon + 2));
  }
  return ConfigError(field, what);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_tabular(const std::string& type) { return type != "cartpole"; }

bool uses_combiner(deep::LearnerKind k) { return k == deep::LearnerKind::dqn_combiner || k == deep::LearnerKind::cql; }

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

// ---------------------------------------------------------------------------
// config parsing

EnvEntry parse_env(const json& j, const std::string& field) {
  require_object(j, field);
  const std::string type = get_string(j, "type", "", field);
  EnvEntry e;
  e.name = get_string(j, "name", type, field);
  check_name(e.name, join(field, "name"));
  json canonical;
  try {
    if (type == "gridworld") {
      const auto spec = gridworld_spec_from_json(j);
      to_json(canonical, spec);
      build_gridworld(spec);
    } else if (type == "garnet") {
      const auto spec = garnet_spec_from_json(j);
      to_json(canonical, spec);
      build_garnet(spec);
    } else if (type == "noisy") {
      const auto spec = overestimation_spec_from_json(j);
      to_json(canonical, spec);
      build_overestimation_mdp(spec);
    } else if (type == "mdp") {
      to_json(canonical, mdp_from_json(j));
      canonical["type"] = "mdp";
    } else if (type == "cartpole") {
      to_json(canonical, cartpole_spec_from_json(j));
    } else if (type.empty()) {
      throw ConfigError(join(field, "type"), "required (one of gridworld, garnet, noisy, mdp, cartpole)");
    } else {
      throw ConfigError(join(field, "type"), "unknown environment '" + type + "' (expected gridworld, garnet, noisy, mdp or cartpole)");
    }
  } catch (const json::exception& ex) {
    throw ConfigError(field, std::string("malformed environment: ") + ex.what());
  } catch (const ContractError& ex) {
    throw contract_to_config(field, ex.what());
  }
  std::set<std::string> allowed{"name", "max_episode_steps"};
  for (const auto& [key, _] : canonical.items()) allowed.insert(key);
  check_keys(j, allowed, field);
  if (type == "cartpole") {
    e.max_episode_steps = canonical.at("max_episode_steps").get<int>();
  } else {
    e.max_episode_steps = static_cast<int>(get_int(j, "max_episode_steps", 100, field));
  }
  if (e.max_episode_steps <= 0) throw ConfigError(join(field, "max_episode_steps"), "must be positive");
  e.spec = std::move(canonical);
  return e;
}

deep::TrainerConfig parse_trainer(const json& j, const std::string& field) {
  require_object(j, field);
  check_keys(j,
             {"name", "kind", "combiner", "random_granularity", "gamma", "batch_size", "target_period", "data_to_update",
              "initial_samples", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "buffer_capacity",
              "learning_rate", "adam_eps", "hidden", "activation", "huber", "ensemble_size", "kappa", "beta",
              "cql_alpha", "track_bias", "bias_rollouts"},
             field);
  deep::TrainerConfig c;
  try {
    c.kind = deep::learner_from_string(get_string(j, "kind", deep::to_string(c.kind), field));
  } catch (const ContractError&) {
    throw ConfigError(join(field, "kind"),
                      "unknown learner (expected dqn_combiner, double_dqn, maxmin_dqn, fr_dqn, sc_dqn or cql)");
  }
  try {
    c.combiner = combiner_from_string(get_string(j, "combiner", std::string(to_string(c.combiner)), field));
  } catch (const ContractError&) {
    throw ConfigError(join(field, "combiner"), "unknown combiner");
  }
  const std::string gran = get_string(j, "random_granularity", "per_sample", field);
  if (gran == "per_sample") {
    c.random_granularity = RandomGranularity::per_sample;
  } else if (gran == "per_entry") {
    c.random_granularity = RandomGranularity::per_entry;
  } else {
    throw ConfigError(join(field, "random_granularity"), "expected per_sample or per_entry");
  }
  c.gamma = get_double(j, "gamma", c.gamma, field);
  c.batch_size = static_cast<int>(get_int(j, "batch_size", c.batch_size, field));
  c.target_period = get_int(j, "target_period", c.target_period, field);
  c.data_to_update = static_cast<int>(get_int(j, "data_to_update", c.data_to_update, field));
  c.initial_samples = get_int(j, "initial_samples", c.initial_samples, field);
  c.epsilon.start = get_double(j, "epsilon_start", c.epsilon.start, field);
  c.epsilon.end = get_double(j, "epsilon_end", c.epsilon.end, field);
  c.epsilon.duration = get_int(j, "epsilon_decay_steps", c.epsilon.duration, field);
  const long cap = get_int(j, "buffer_capacity", static_cast<long>(c.buffer_capacity), field);
  if (cap <= 0) throw ConfigError(join(field, "buffer_capacity"), "must be positive");
  c.buffer_capacity = static_cast<std::size_t>(cap);
  c.learning_rate = get_double(j, "learning_rate", c.learning_rate, field);
  c.adam_eps = get_double(j, "adam_eps", c.adam_eps, field);
  if (j.contains("hidden")) {
    const auto& h = j.at("hidden");
    if (!h.is_array()) throw ConfigError(join(field, "hidden"), "expected an array of layer widths");
    c.hidden.clear();
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (!h[i].is_number_integer()) throw ConfigError(index(join(field, "hidden"), i), "expected an integer");
      c.hidden.push_back(h[i].get<int>());
    }
  }
  try {
    c.activation = nn::activation_from_string(get_string(j, "activation", nn::to_string(c.activation), field));
  } catch (const ContractError&) {
    throw ConfigError(join(field, "activation"), "expected relu or tanh");
  }
  c.huber = get_bool(j, "huber", c.huber, field);
  c.ensemble_size = static_cast<int>(get_int(j, "ensemble_size", c.ensemble_size, field));
  c.kappa = get_double(j, "kappa", c.kappa, field);
  c.beta = get_double(j, "beta", c.beta, field);
  c.cql_alpha = get_double(j, "cql_alpha", c.cql_alpha, field);
  c.track_bias = get_bool(j, "track_bias", c.track_bias, field);
  c.bias_rollouts = static_cast<int>(get_int(j, "bias_rollouts", c.bias_rollouts, field));
  try {
    c.validate();
  } catch (const ContractError& ex) {
    throw contract_to_config(field, ex.what());
  }
  return c;
}

json trainer_to_json(const deep::TrainerConfig& c) {
  return json{{"kind", deep::to_string(c.kind)},
              {"combiner", std::string(to_string(c.combiner))},
              {"random_granularity", c.random_granularity == RandomGranularity::per_sample ? "per_sample" : "per_entry"},
              {"gamma", c.gamma},
              {"batch_size", c.batch_size},
              {"target_period", c.target_period},
              {"data_to_update", c.data_to_update},
              {"initial_samples", c.initial_samples},
              {"epsilon_start", c.epsilon.start},
              {"epsilon_end", c.epsilon.end},
              {"epsilon_decay_steps", c.epsilon.duration},
              {"buffer_capacity", c.buffer_capacity},
              {"learning_rate", c.learning_rate},
              {"adam_eps", c.adam_eps},
              {"hidden", c.hidden},
              {"activation", nn::to_string(c.activation)},
              {"huber", c.huber},
              {"ensemble_size", c.ensemble_size},
              {"kappa", c.kappa},
              {"beta", c.beta},
              {"cql_alpha", c.cql_alpha},
              {"track_bias", c.track_bias},
              {"bias_rollouts", c.bias_rollouts}};
}

namespace {

template <typename F>
void one_or_many(const json& exp, const std::string& single, const std::string& plural, const std::string& field,
                 const json& fallback, F&& each) {
  const bool has_single = exp.contains(single);
  const bool has_plural = exp.contains(plural);
  if (has_single && has_plural) throw ConfigError(join(field, plural), "give either '" + single + "' or '" + plural + "', not both");
  if (has_plural) {
    const auto& arr = exp.at(plural);
    if (!arr.is_array() || arr.empty()) throw ConfigError(join(field, plural), "expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) each(arr[i], index(join(field, plural), i));
  } else if (has_single) {
    each(exp.at(single), join(field, single));
  } else if (!fallback.is_null()) {
    each(fallback, join(field, single));
  } else {
    throw ConfigError(join(field, single), "required");
  }
}

ExperimentSpec parse_experiment(const json& j, const std::string& field, std::size_t position) {
  require_object(j, field);
  check_keys(j,
             {"name", "env", "envs", "learner", "learners", "combiners", "seeds", "epochs", "steps_per_epoch",
              "eval_episodes", "offline"},
             field);
  ExperimentSpec e;
  e.name = get_string(j, "name", "exp" + std::to_string(position), field);
  check_name(e.name, join(field, "name"));

  std::set<std::string> env_names;
  one_or_many(j, "env", "envs", field, json(), [&](const json& v, const std::string& f) {
    EnvEntry env = parse_env(v, f);
    if (!env_names.insert(env.name).second) throw ConfigError(join(f, "name"), "duplicate environment name '" + env.name + "'");
    e.envs.push_back(std::move(env));
  });

  std::set<std::string> learner_names;
  one_or_many(j, "learner", "learners", field, json::object(), [&](const json& v, const std::string& f) {
    LearnerEntry l;
    l.trainer = parse_trainer(v, f);
    l.name = get_string(v, "name", deep::to_string(l.trainer.kind), f);
    check_name(l.name, join(f, "name"));
    if (!learner_names.insert(l.name).second) throw ConfigError(join(f, "name"), "duplicate learner name '" + l.name + "'");
    e.learners.push_back(std::move(l));
  });

  if (j.contains("combiners")) {
    const auto& arr = j.at("combiners");
    if (!arr.is_array() || arr.empty()) throw ConfigError(join(field, "combiners"), "expected a non-empty array of names");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string f = index(join(field, "combiners"), i);
      if (!arr[i].is_string()) throw ConfigError(f, "expected a combiner name");
      const auto name = arr[i].get<std::string>();
      try {
        e.combiners.push_back(combiner_from_string(name));
      } catch (const ContractError&) {
        throw ConfigError(f, "unknown combiner '" + name + "' (expected min, max, mean, random, target_only or online_only)");
      }
      if (!seen.insert(name).second) throw ConfigError(f, "duplicate combiner '" + name + "'");
    }
  }

  if (!j.contains("seeds")) throw ConfigError(join(field, "seeds"), "required");
  const auto& seeds = j.at("seeds");
  if (!seeds.is_array()) throw ConfigError(join(field, "seeds"), "expected an array of non-negative integers");
  if (seeds.empty()) throw ConfigError(join(field, "seeds"), "must not be empty");
  std::set<std::uint64_t> seen_seeds;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string f = index(join(field, "seeds"), i);
    if (!seeds[i].is_number_integer() || (!seeds[i].is_number_unsigned() && seeds[i].get<std::int64_t>() < 0))
      throw ConfigError(f, "expected a non-negative integer");
    const auto s = seeds[i].get<std::uint64_t>();
    if (!seen_seeds.insert(s).second) throw ConfigError(f, "duplicate seed " + std::to_string(s));
    e.seeds.push_back(s);
  }

  e.epochs = static_cast<int>(get_int(j, "epochs", e.epochs, field));
  if (e.epochs <= 0) throw ConfigError(join(field, "epochs"), "must be positive");
  e.steps_per_epoch = get_int(j, "steps_per_epoch", e.steps_per_epoch, field);
  if (e.steps_per_epoch <= 0) throw ConfigError(join(field, "steps_per_epoch"), "must be positive");
  e.eval_episodes = static_cast<int>(get_int(j, "eval_episodes", e.eval_episodes, field));
  if (e.eval_episodes <= 0) throw ConfigError(join(field, "eval_episodes"), "must be positive");

  if (j.contains("offline")) {
    const std::string f = join(field, "offline");
    const auto& o = j.at("offline");
    require_object(o, f);
    check_keys(o, {"size", "behavior_epsilon", "max_episode_steps"}, f);
    OfflineSpec spec;
    const long size = get_int(o, "size", static_cast<long>(spec.size), f);
    if (size <= 0) throw ConfigError(join(f, "size"), "must be positive");
    spec.size = static_cast<std::size_t>(size);
    spec.behavior_epsilon = get_double(o, "behavior_epsilon", spec.behavior_epsilon, f);
    if (spec.behavior_epsilon < 0.0 || spec.behavior_epsilon > 1.0) {
      throw ConfigError(join(f, "behavior_epsilon"), "must lie in [0, 1]");
    }
    spec.max_episode_steps = static_cast<int>(get_int(o, "max_episode_steps", spec.max_episode_steps, f));
    if (spec.max_episode_steps <= 0) throw ConfigError(join(f, "max_episode_steps"), "must be positive");
    for (std::size_t i = 0; i < e.envs.size(); ++i) {
      if (!is_tabular(e.envs[i].spec.at("type").get<std::string>())) {
        throw ConfigError(f, "offline datasets need a tabular environment; '" + e.envs[i].name + "' is not");
      }
    }
    e.offline = spec;
  }
  for (std::size_t i = 0; i < e.learners.size(); ++i) {
    if (e.learners[i].trainer.kind == deep::LearnerKind::cql && !e.offline) {
      throw ConfigError(join(field, "offline"), "required by learner '" + e.learners[i].name + "' (cql trains offline)");
    }
  }
  return e;
}

}  // namespace

GridConfig parse_config(const json& doc) {
  require_object(doc, "(root)");
  check_keys(doc, {"experiments", "output_dir", "parallelism", "bootstrap"}, "");
  GridConfig c;
  c.output_dir = get_string(doc, "output_dir", c.output_dir, "");
  c.parallelism = static_cast<int>(get_int(doc, "parallelism", c.parallelism, ""));
  if (c.parallelism <= 0) throw ConfigError("parallelism", "must be positive");
  if (doc.contains("bootstrap")) {
    const auto& b = doc.at("bootstrap");
    require_object(b, "bootstrap");
    check_keys(b, {"resamples", "level"}, "bootstrap");
    c.bootstrap_resamples = static_cast<int>(get_int(b, "resamples", c.bootstrap_resamples, "bootstrap"));
    c.bootstrap_level = get_double(b, "level", c.bootstrap_level, "bootstrap");
    if (c.bootstrap_resamples <= 0) throw ConfigError("bootstrap.resamples", "must be positive");
    if (!(c.bootstrap_level > 0.0 && c.bootstrap_level < 1.0)) throw ConfigError("bootstrap.level", "must lie in (0, 1)");
  }
  if (!doc.contains("experiments")) throw ConfigError("experiments", "required");
  const auto& exps = doc.at("experiments");
  if (!exps.is_array() || exps.empty()) throw ConfigError("experiments", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const std::string f = index("experiments", i);
    c.experiments.push_back(parse_experiment(exps[i], f, i));
    if (!names.insert(c.experiments.back().name).second) {
      throw ConfigError(join(f, "name"), "duplicate experiment name '" + c.experiments.back().name + "'");
    }
  }
  return c;
}

GridConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ConfigError("(file)", std::string("invalid JSON: ") + ex.what());
  }
  return parse_config(doc);
}

json canonical_json(const GridConfig& config) {
  json exps = json::array();
  for (const auto& e : config.experiments) {
    json envs = json::array();
    for (const auto& env : e.envs) {
      envs.push_back({{"name", env.name}, {"max_episode_steps", env.max_episode_steps}, {"spec", env.spec}});
    }
    json learners = json::array();
    for (const auto& l : e.learners) learners.push_back({{"name", l.name}, {"trainer", trainer_to_json(l.trainer)}});
    json combiners = json::array();
    for (auto k : e.combiners) combiners.push_back(std::string(to_string(k)));
    json item{{"name", e.name},         {"envs", envs},     {"learners", learners},
              {"combiners", combiners}, {"seeds", e.seeds}, {"epochs", e.epochs},
              {"steps_per_epoch", e.steps_per_epoch}, {"eval_episodes", e.eval_episodes}};
    item["offline"] = e.offline ? json{{"size", e.offline->size},
                                       {"behavior_epsilon", e.offline->behavior_epsilon},
                                       {"max_episode_steps", e.offline->max_episode_steps}}
                                : json(nullptr);
    exps.push_back(std::move(item));
  }
  return json{{"experiments", exps},
              {"bootstrap", {{"resamples", config.bootstrap_resamples}, {"level", config.bootstrap_level}}}};
}

std::string config_hash(const GridConfig& config) { return hex16(fnv1a(canonical_json(config).dump())); }

// ---------------------------------------------------------------------------
// environments and datasets

std::unique_ptr<deep::Environment> make_environment(const EnvEntry& env) {
  const auto type = env.spec.at("type").get<std::string>();
  if (type == "gridworld") {
    return std::make_unique<deep::TabularEnvironment>(build_gridworld(gridworld_spec_from_json(env.spec)).mdp,
                                                      env.max_episode_steps);
  }
  if (type == "garnet") {
    return std::make_unique<deep::TabularEnvironment>(build_garnet(garnet_spec_from_json(env.spec)), env.max_episode_steps);
  }
  if (type == "noisy") {
    return std::make_unique<deep::TabularEnvironment>(build_overestimation_mdp(overestimation_spec_from_json(env.spec)),
                                                      env.max_episode_steps);
  }
  if (type == "mdp") {
    return std::make_unique<deep::TabularEnvironment>(mdp_from_json(env.spec), env.max_episode_steps);
  }
  if (type == "cartpole") return std::make_unique<deep::CartPoleEnvironment>(cartpole_spec_from_json(env.spec));
  throw ContractError("make_environment: unknown type '" + type + "'");
}

deep::ReplayBuffer dataset_to_buffer(const OfflineDataset& dataset, const deep::TabularEnvironment& env) {
  require(!dataset.transitions.empty(), "dataset_to_buffer: empty dataset");
  check_dataset(dataset, env.mdp());
  const auto dim = static_cast<std::size_t>(env.observation_size());
  deep::ReplayBuffer buffer(dataset.transitions.size(), dim);
  std::vector<double> obs(dim);
  std::vector<double> next(dim);
  for (const auto& t : dataset.transitions) {
    env.encode(t.state, obs);
    env.encode(t.next_state, next);
    buffer.push(obs, t.action, t.reward, next, t.terminal);
  }
  return buffer;
}

OfflineDataset make_offline_dataset(const deep::TabularEnvironment& env, const OfflineSpec& spec, std::uint64_t seed) {
  BehaviorPolicy policy;
  policy.epsilon = spec.behavior_epsilon;
  policy.q = value_iteration(env.mdp());
  policy.label = "eps_greedy_qstar";
  RngStream rng(seed, StreamId::dataset);
  return generate_offline_dataset(env.mdp(), policy, spec.size, rng, spec.max_episode_steps);
}

// ---------------------------------------------------------------------------
// cells

std::vector<Cell> expand_cells(const GridConfig& config) {
  std::vector<Cell> cells;
  for (const auto& e : config.experiments) {
    for (const auto& env : e.envs) {
      for (const auto& l : e.learners) {
        std::vector<CombinerKind> kinds{l.trainer.combiner};
        if (uses_combiner(l.trainer.kind) && !e.combiners.empty()) kinds = e.combiners;
        for (auto k : kinds) {
          Cell c;
          c.experiment = &e;
          c.env = &env;
          c.learner = &l;
          c.combiner = k;
          c.trainer = l.trainer;
          c.trainer.combiner = k;
          c.config_id = e.name + "." + env.name + "." + l.name;
          if (uses_combiner(l.trainer.kind)) c.config_id += "." + std::string(to_string(k));
          cells.push_back(std::move(c));
        }
      }
    }
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.config_id < b.config_id; });
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].config_id == cells[i - 1].config_id) {
      throw ConfigError("experiments", "two cells share the id '" + cells[i].config_id + "'");
    }
  }
  return cells;
}

RunOutcome run_cell(const Cell& cell, std::uint64_t seed) {
  RunOutcome out;
  try {
    auto env = make_environment(*cell.env);
    const auto& exp = *cell.experiment;
    if (exp.offline) {
      const auto* tab = dynamic_cast<const deep::TabularEnvironment*>(env.get());
      require(tab != nullptr, "run_cell: offline training needs a tabular environment");
      auto buffer = dataset_to_buffer(make_offline_dataset(*tab, *exp.offline, seed), *tab);
      deep::Trainer trainer(cell.trainer, std::move(env), std::move(buffer), seed);
      out.rows = trainer.run(exp.epochs, exp.steps_per_epoch, exp.eval_episodes);
    } else {
      deep::Trainer trainer(cell.trainer, std::move(env), seed);
      out.rows = trainer.run(exp.epochs, exp.steps_per_epoch, exp.eval_episodes);
    }
  } catch (const std::exception& ex) {
    out.rows.clear();
    out.error = ex.what();
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string result_file_name(const std::string& config_id, std::uint64_t seed) {
  return config_id + "__seed" + std::to_string(seed) + ".csv";
}

std::string result_csv(const std::string& config_id, std::uint64_t seed, const std::vector<deep::EpochRow>& rows) {
  const bool has_ratio = !rows.empty() && rows.front().online_selection_ratio.has_value();
  const bool has_bias = !rows.empty() && rows.front().bias_estimate.has_value();
  std::vector<std::string> header{"config_id", "seed", "epoch", "env_steps", "gradient_steps", "eval_return", "loss_mean"};
  if (has_ratio) header.push_back("online_selection_ratio");
  if (has_bias) header.push_back("bias_estimate");
  std::string text = csv::row(header);
  for (const auto& r : rows) {
    std::vector<std::string> f{config_id,
                               std::to_string(seed),
                               std::to_string(r.epoch),
                               std::to_string(r.env_steps),
                               std::to_string(r.gradient_steps),
                               format_double(r.eval_return),
                               format_double(r.loss_mean)};
    if (has_ratio) f.push_back(format_double(r.online_selection_ratio.value_or(0.0)));
    if (has_bias) f.push_back(format_double(r.bias_estimate.value_or(0.0)));
    text += csv::row(f);
  }
  return text;
}

RunOptions resolve_options(const GridConfig& config, const std::optional<std::string>& cli_out,
                           std::optional<int> cli_parallelism) {
  RunOptions o;
  o.out_dir = config.output_dir;
  o.parallelism = config.parallelism;
  if (const char* env = std::getenv("MINTO_OUT_DIR"); env && *env) o.out_dir = env;
  if (const char* env = std::getenv("MINTO_PARALLELISM"); env && *env) {
    int p = 0;
    const std::string_view sv(env);
    const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), p);
    if (res.ec != std::errc() || res.ptr != sv.data() + sv.size() || p <= 0) {
      throw ConfigError("MINTO_PARALLELISM", "expected a positive integer");
    }
    o.parallelism = p;
  }
  if (cli_out) o.out_dir = *cli_out;
  if (cli_parallelism) {
    if (*cli_parallelism <= 0) throw ConfigError("--parallelism", "must be positive");
    o.parallelism = *cli_parallelism;
  }
  return o;
}

std::string code_version() { return MINTO_VERSION; }

// ---------------------------------------------------------------------------
// aggregation

namespace {

struct LoadedRun {
  std::vector<double> eval_return;
  std::vector<double> ratio;
  std::vector<double> bias;
};

std::optional<LoadedRun> load_run(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  const auto table = csv::read_table(path);
  const auto ret = table.column("eval_return");
  if (!ret) return std::nullopt;
  const auto ratio = table.column("online_selection_ratio");
  const auto bias = table.column("bias_estimate");
  LoadedRun run;
  for (const auto& row : table.rows) {
    run.eval_return.push_back(std::stod(row.at(*ret)));
    if (ratio) run.ratio.push_back(std::stod(row.at(*ratio)));
    if (bias) run.bias.push_back(std::stod(row.at(*bias)));
  }
  return run;
}

metrics::Anchor anchor_for(const EnvEntry& env) {
  const auto e = make_environment(env);
  if (const auto* tab = dynamic_cast<const deep::TabularEnvironment*>(e.get())) return metrics::tabular_anchor(*tab, 200, 0);
  if (const auto* cp = dynamic_cast<const deep::CartPoleEnvironment*>(e.get())) return metrics::cartpole_anchor(*cp, 200, 0);
  throw ContractError("anchor_for: unsupported environment");
}

std::string group_of(const Cell& c) {
  return uses_combiner(c.trainer.kind) ? c.learner->name + ":" + std::string(to_string(c.combiner)) : c.learner->name;
}

std::vector<metrics::Interval> intervals(const metrics::CurveSet& set, std::uint64_t substream, const GridConfig& config) {
  bool enough = true;
  for (const auto& task : set.scores) enough = enough && task.size() >= 2;
  if (!enough) {
    std::vector<metrics::Interval> out;
    for (double p : metrics::pooled_iqm(set)) out.push_back({p, p, p});
    return out;
  }
  RngStream rng(0, StreamId::bootstrap, substream);
  return metrics::bootstrap_ci(set, rng, {config.bootstrap_resamples, config.bootstrap_level});
}

double mean_at(const std::vector<const std::vector<double>*>& runs, std::size_t e) {
  double s = 0.0;
  for (const auto* r : runs) s += (*r)[e];
  return s / static_cast<double>(runs.size());
}

}  // namespace

void write_aggregates(const GridConfig& config, const fs::path& out_dir, std::ostream& log) {
  fs::create_directories(out_dir / "aggregate");
  const auto cells = expand_cells(config);
  std::string anchors_csv = csv::row({"experiment", "env", "floor", "ceiling"});
  std::string curves_csv = csv::row({"experiment", "env", "group", "epoch", "n_seeds", "iqm", "ci_low", "ci_high", "raw_mean"});
  std::string auc_csv = csv::row({"experiment", "group", "n_tasks", "n_runs", "auc_iqm", "ci_low", "ci_high"});
  std::string sel_csv = csv::row({"experiment", "env", "group", "epoch", "n_seeds", "mean_ratio"});
  std::string bias_csv = csv::row({"experiment", "env", "group", "epoch", "n_seeds", "mean_bias"});
  bool any_sel = false;
  bool any_bias = false;

  for (const auto& exp : config.experiments) {
    std::map<std::string, metrics::Anchor> anchors;
    for (const auto& env : exp.envs) {
      anchors[env.name] = anchor_for(env);
      anchors_csv += csv::row({exp.name, env.name, format_double(anchors[env.name].floor),
                               format_double(anchors[env.name].ceiling)});
    }
    // group -> env -> runs, in deterministic (config_id, seed) order
    std::map<std::string, std::map<std::string, std::vector<LoadedRun>>> groups;
    for (const auto& c : cells) {
      if (c.experiment != &exp) continue;
      auto& runs = groups[group_of(c)][c.env->name];
      std::vector<std::uint64_t> seeds = exp.seeds;
      std::sort(seeds.begin(), seeds.end());
      for (auto seed : seeds) {
        auto run = load_run(out_dir / "results" / result_file_name(c.config_id, seed));
        if (run && run->eval_return.size() == static_cast<std::size_t>(exp.epochs)) runs.push_back(std::move(*run));
      }
    }
    for (const auto& [group, by_env] : groups) {
      metrics::CurveSet all;
      std::size_t n_runs = 0;
      for (const auto& [env_name, runs] : by_env) {
        if (runs.empty()) {
          log << "warning: no completed runs for " << exp.name << "/" << env_name << "/" << group << "\n";
          continue;
        }
        metrics::CurveSet one;
        one.anchors = {anchors.at(env_name)};
        one.scores.resize(1);
        for (const auto& r : runs) one.scores[0].push_back(r.eval_return);
        const auto norm = one.normalized();
        const auto ci = intervals(norm, fnv1a(exp.name + "/" + env_name + "/" + group), config);
        for (std::size_t e = 0; e < ci.size(); ++e) {
          double raw = 0.0;
          for (const auto& r : runs) raw += r.eval_return[e];
          raw /= static_cast<double>(runs.size());
          curves_csv += csv::row({exp.name, env_name, group, std::to_string(e + 1), std::to_string(runs.size()),
                                  format_double(ci[e].point), format_double(ci[e].low), format_double(ci[e].high),
                                  format_double(raw)});
        }
        std::vector<const std::vector<double>*> ratios;
        std::vector<const std::vector<double>*> biases;
        for (const auto& r : runs) {
          if (!r.ratio.empty()) ratios.push_back(&r.ratio);
          if (!r.bias.empty()) biases.push_back(&r.bias);
        }
        if (!ratios.empty()) {
          any_sel = true;
          for (std::size_t e = 0; e < ratios.front()->size(); ++e) {
            sel_csv += csv::row({exp.name, env_name, group, std::to_string(e + 1), std::to_string(ratios.size()),
                                 format_double(mean_at(ratios, e))});
          }
        }
        if (!biases.empty()) {
          any_bias = true;
          for (std::size_t e = 0; e < biases.front()->size(); ++e) {
            bias_csv += csv::row({exp.name, env_name, group, std::to_string(e + 1), std::to_string(biases.size()),
                                  format_double(mean_at(biases, e))});
          }
        }
        all.anchors.push_back(anchors.at(env_name));
        all.scores.push_back(one.scores[0]);
        n_runs += runs.size();
      }
      if (all.scores.empty()) continue;
      const auto auc_set = all.auc_set();
      const auto ci = intervals(auc_set, fnv1a(exp.name + "/auc/" + group), config);
      auc_csv += csv::row({exp.name, group, std::to_string(all.scores.size()), std::to_string(n_runs),
                           format_double(ci[0].point), format_double(ci[0].low), format_double(ci[0].high)});
    }
  }
  const fs::path agg = out_dir / "aggregate";
  write_text(agg / "anchors.csv", anchors_csv);
  write_text(agg / "curves.csv", curves_csv);
  write_text(agg / "auc.csv", auc_csv);
  if (any_sel) write_text(agg / "selection.csv", sel_csv);
  if (any_bias) write_text(agg / "bias.csv", bias_csv);
}

// ---------------------------------------------------------------------------
// grid execution

int run_grid(const GridConfig& config, const RunOptions& options, std::ostream& log) {
  require(options.parallelism > 0, "run_grid: parallelism must be positive");
  const auto cells = expand_cells(config);
  const fs::path out = options.out_dir;
  fs::create_directories(out / "results");
  fs::create_directories(out / "timing");

  struct Job {
    const Cell* cell;
    std::uint64_t seed;
    std::optional<std::string> error;
    double wall_ms = 0.0;
  };
  std::vector<Job> jobs;
  for (const auto& c : cells) {
    std::vector<std::uint64_t> seeds = c.experiment->seeds;
    std::sort(seeds.begin(), seeds.end());
    for (auto s : seeds) jobs.push_back({&c, s, std::nullopt, 0.0});
  }

  const std::string started = utc_now();
  json canonical = canonical_json(config);
  write_text(out / "config.json", canonical.dump(2) + "\n");

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      Job& job = jobs[i];
      const std::string file = result_file_name(job.cell->config_id, job.seed);
      const auto t0 = std::chrono::steady_clock::now();
      RunOutcome outcome = run_cell(*job.cell, job.seed);
      job.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      std::error_code ec;
      if (outcome.error) {
        job.error = outcome.error;
        fs::remove(out / "results" / file, ec);
        fs::remove(out / "timing" / file, ec);
      } else {
        try {
          write_text(out / "results" / file, result_csv(job.cell->config_id, job.seed, outcome.rows));
          std::string timing = csv::row({"epoch", "wall_ms"});
          for (const auto& r : outcome.rows) timing += csv::row({std::to_string(r.epoch), format_double(r.wall_ms)});
          write_text(out / "timing" / file, timing);
        } catch (const std::exception& ex) {
          job.error = ex.what();
        }
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      log << "[" << (i + 1) << "/" << jobs.size() << "] " << job.cell->config_id << " seed " << job.seed
          << (job.error ? " FAILED: " + *job.error : std::string(" ok")) << "\n";
    }
  };
  const int threads = std::min<int>(options.parallelism, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  write_aggregates(config, out, log);
  if (options.plots) plots::emit_plots(out, log);

  json manifest;
  manifest["config_hash"] = config_hash(config);
  manifest["code_version"] = code_version();
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_now();
  manifest["parallelism"] = options.parallelism;
  json cell_list = json::array();
  std::size_t failed = 0;
  for (const auto& job : jobs) {
    json item{{"config_id", job.cell->config_id},
              {"seed", job.seed},
              {"status", job.error ? "failed" : "ok"},
              {"wall_ms", job.wall_ms}};
    if (job.error) {
      item["error"] = *job.error;
      ++failed;
    } else {
      item["result_file"] = "results/" + result_file_name(job.cell->config_id, job.seed);
    }
    cell_list.push_back(std::move(item));
  }
  manifest["runs"] = cell_list;
  manifest["failed"] = failed;
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  log << jobs.size() - failed << "/" << jobs.size() << " runs completed; artifacts in " << out.string() << "\n";
  return failed > 0 ? 1 : 0;
}

}  // namespace minto::runner

#include "minto/repro.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "minto/csv.hpp"
#include "minto/plots.hpp"
#include "minto/runner.hpp"
#include "minto/studies.hpp"

namespace minto::repro {

using json = nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"operator_ablation", "minto_vs_dqn",        "minto_vs_baselines",
                                          "offline_cql",       "tabular_convergence", "appendix_a_checks"};
  return n;
}

namespace {

json seeds(int n) {
  json s = json::array();
  for (int i = 0; i < n; ++i) s.push_back(i);
  return s;
}

json named(json learner, const std::string& name) {
  learner["name"] = name;
  return learner;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string list_names() {
  std::string s;
  for (const auto& n : names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

int appendix(const fs::path& out, bool smoke, std::ostream& log) {
  const long trials = smoke ? 10'000 : 1'000'000;
  const auto r = studies::appendix_a(trials, 0);
  const bool ok = r.max_nonexpansion_excess <= 1e-12 && r.max_identity_residual <= 1e-12;
  json j{{"trials", r.trials},
         {"max_nonexpansion_excess", r.max_nonexpansion_excess},
         {"nonexpansion_violations", r.nonexpansion_violations},
         {"max_identity_residual", r.max_identity_residual},
         {"tolerance", 1e-12},
         {"pass", ok}};
  write_text(out / "report.json", j.dump(2) + "\n");
  std::ostringstream txt;
  txt << "g_minto operator checks over " << r.trials << " random tensor pairs\n"
      << "non-expansion: max violation " << r.max_nonexpansion_excess << ", violating trials " << r.nonexpansion_violations
      << "\n"
      << "identical inputs: max residual " << r.max_identity_residual << "\n"
      << (ok ? "PASS" : "FAIL") << "\n";
  write_text(out / "report.txt", txt.str());
  log << txt.str();
  return ok ? 0 : 1;
}

int convergence(const fs::path& out, bool smoke, std::ostream& log) {
  studies::ConvergenceConfig cfg;
  if (smoke) {
    cfg.garnets = 2;
    cfg.total_steps = 50'000;
  }
  const auto learners = studies::convergence_learners(cfg, false);
  const auto rows = studies::tabular_convergence(cfg, learners);
  std::string text = csv::row({"garnet", "n_states", "n_actions", "learner", "max_norm_distance", "min_visits"});
  std::map<std::string, std::pair<double, double>> summary;  // worst, sum
  for (const auto& r : rows) {
    text += csv::row({std::to_string(r.garnet), std::to_string(r.n_states), std::to_string(r.n_actions), r.learner,
                      runner::format_double(r.distance), std::to_string(r.min_visits)});
    auto& s = summary[r.learner];
    s.first = std::max(s.first, r.distance);
    s.second += r.distance;
  }
  write_text(out / "convergence.csv", text);
  std::string sum_text = csv::row({"learner", "worst_distance", "mean_distance"});
  std::vector<plots::Bar> bars;
  for (const auto& l : learners) {
    const auto& s = summary[l.name];
    const double mean = s.second / cfg.garnets;
    sum_text += csv::row({l.name, runner::format_double(s.first), runner::format_double(mean)});
    bars.push_back({l.name, s.first, s.first, s.first});
    log << l.name << ": worst " << s.first << ", mean " << mean << "\n";
  }
  write_text(out / "summary.csv", sum_text);
  fs::create_directories(out / "plots");
  write_text(out / "plots" / "convergence.svg", plots::bar_chart("Final max-norm distance to Q*", "worst over garnets", bars));
  return 0;
}

}  // namespace

json grid_config(const std::string& name, bool smoke) {
  json exp{{"name", name}, {"envs", studies::desk_envs()}, {"epochs", 10}, {"steps_per_epoch", 5000},
           {"eval_episodes", 10}};
  if (name == "operator_ablation") {
    exp["learner"] = studies::desk_learner("dqn_combiner");
    exp["combiners"] = {"min", "max", "mean", "random", "target_only", "online_only"};
    exp["seeds"] = seeds(5);
  } else if (name == "minto_vs_dqn") {
    exp["learners"] = {named(studies::desk_learner("dqn_combiner"), "dqn_combiner")};
    exp["combiners"] = {"min", "target_only"};
    exp["seeds"] = seeds(10);
  } else if (name == "minto_vs_baselines") {
    auto minto = named(studies::desk_learner("dqn_combiner"), "minto");
    minto["combiner"] = "min";
    auto dqn = named(studies::desk_learner("dqn_combiner"), "dqn");
    dqn["combiner"] = "target_only";
    exp["learners"] = {minto, dqn, studies::desk_learner("double_dqn"), studies::desk_learner("maxmin_dqn"),
                       studies::desk_learner("fr_dqn"), studies::desk_learner("sc_dqn")};
    exp["seeds"] = seeds(5);
  } else if (name == "offline_cql") {
    json grid;
    to_json(grid, studies::CqlConfig::default_grid());
    grid["name"] = "gridworld";
    grid["max_episode_steps"] = 50;
    exp["envs"] = json::array({grid});
    auto cql = named(studies::desk_learner("cql"), "cql");
    auto offline_dqn = named(studies::desk_learner("cql"), "offline_dqn");
    offline_dqn["cql_alpha"] = 0.0;
    offline_dqn["combiner"] = "target_only";
    exp["learners"] = {cql, offline_dqn};
    exp["combiners"] = {"target_only", "min"};
    exp["offline"] = {{"size", 250}, {"behavior_epsilon", 0.7}, {"max_episode_steps", 50}};
    exp["steps_per_epoch"] = 1000;
    exp["seeds"] = seeds(5);
  } else {
    throw UnknownStudy("unknown study '" + name + "' (valid: " + list_names() + ")");
  }
  if (smoke) {
    exp["seeds"] = seeds(2);
    exp["epochs"] = 2;
    exp["steps_per_epoch"] = 600;
    exp["eval_episodes"] = 2;
  }
  return json{{"experiments", json::array({exp})}};
}

int run(const std::string& name, const std::optional<std::string>& out_dir, std::optional<int> parallelism,
        std::ostream& log, bool smoke) {
  if (std::find(names().begin(), names().end(), name) == names().end()) {
    throw UnknownStudy("unknown study '" + name + "' (valid: " + list_names() + ")");
  }
  fs::path out = fs::path("repro") / name;
  if (const char* env = std::getenv("MINTO_OUT_DIR"); env && *env) out = fs::path(env) / name;
  if (out_dir) out = *out_dir;
  fs::create_directories(out);

  if (name == "appendix_a_checks") return appendix(out, smoke, log);
  if (name == "tabular_convergence") return convergence(out, smoke, log);

  const auto config = runner::parse_config(grid_config(name, smoke));
  auto options = runner::resolve_options(config, out.string(), parallelism);
  return runner::run_grid(config, options, log);
}

}  // namespace minto::repro

// Acceptance checks. `acceptance N` runs criterion N; no argument runs all.
// Each criterion prints one line starting with "criterion N: PASS" or "FAIL".

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minto/csv.hpp"
#include "minto/deep.hpp"
#include "minto/metrics.hpp"
#include "minto/repro.hpp"
#include "minto/runner.hpp"
#include "minto/studies.hpp"

using namespace minto;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("minto_accept_" + name);
  fs::remove_all(p);
  return p;
}

std::unique_ptr<deep::Environment> slip_grid() {
  GridWorldSpec spec;
  spec.slip_prob = 0.1;
  return std::make_unique<deep::TabularEnvironment>(build_gridworld(spec).mdp, 50);
}

// ---------------------------------------------------------------------------

Verdict c1() {
  Stopwatch w;
  const auto r = studies::appendix_a(1'000'000, 0);
  const double secs = w.seconds();
  const bool ok = r.max_nonexpansion_excess <= 1e-12 && r.max_identity_residual <= 1e-12 && secs < 60.0;
  return {ok, "trials " + std::to_string(r.trials) + ", max non-expansion excess " + fmt(r.max_nonexpansion_excess) +
                  ", max identical-input residual " + fmt(r.max_identity_residual) + ", " + fmt(secs) + " s"};
}

Verdict c2() {
  Stopwatch w;
  studies::ConvergenceConfig cfg;
  const auto rows = studies::tabular_convergence(cfg, studies::convergence_learners(cfg, true));
  const double secs = w.seconds();
  std::map<std::string, double> worst;
  for (const auto& r : rows) worst[r.learner] = std::max(worst[r.learner], r.distance);
  bool ok = secs < 300.0 && !rows.empty();
  std::string detail;
  for (const auto& [name, d] : worst) {
    ok = ok && d <= 0.05;
    detail += name + " worst " + fmt(d) + ", ";
  }
  return {ok, detail + std::to_string(rows.size()) + " runs, " + fmt(secs) + " s"};
}

Verdict c3() {
  Stopwatch w;
  studies::BiasConfig cfg;
  const std::vector<CombinerKind> order{CombinerKind::max, CombinerKind::online_only, CombinerKind::target_only,
                                        CombinerKind::min};
  const auto bias = studies::bias_study(cfg, order);
  const double secs = w.seconds();
  bool ok = secs < 600.0;
  std::string detail;
  for (auto k : order) detail += std::string(to_string(k)) + " " + fmt(metrics::mean(bias.at(k))) + ", ";
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    RngStream rng(i, StreamId::bootstrap);
    const auto gap = metrics::bootstrap_mean_difference(bias.at(order[i]), bias.at(order[i + 1]), rng);
    ok = ok && gap.low > 0.0;
    detail += "gap" + std::to_string(i + 1) + " [" + fmt(gap.low) + ", " + fmt(gap.high) + "], ";
  }
  return {ok, detail + fmt(secs) + " s"};
}

Verdict c4() {
  double worst = 0.0;
  for (auto act : {nn::Activation::relu, nn::Activation::tanh}) {
    deep::TrainerConfig c;
    c.combiner = CombinerKind::min;
    c.hidden = {32, 32};
    c.activation = act;
    c.initial_samples = 64;
    c.target_period = 50;
    c.epsilon.duration = 500;
    deep::Trainer t(c, slip_grid(), 3);
    // a few syncs so target and online differ
    while (t.gradient_steps() < 120) t.env_step();
    RngStream rng(2, StreamId::property);
    const deep::Batch b = t.buffer().sample(8, rng);
    Combiner comb(CombinerKind::min);
    const nn::Mlp* targets[] = {&t.target().params};
    const auto frozen = deep::compute_targets(c, comb, t.online(), targets, b).targets;
    const auto g = t.loss_gradient(b);
    nn::Mlp probe = t.online();
    const double h = 1e-5;
    for (std::size_t i = 0; i < probe.param_count(); ++i) {
      const double keep = probe.params()[i];
      probe.params()[i] = keep + h;
      const double up = t.frozen_target_loss(probe, b, frozen);
      probe.params()[i] = keep - h;
      const double down = t.frozen_target_loss(probe, b, frozen);
      probe.params()[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
    }
  }
  return {worst < 1e-4, "max relative error " + fmt(worst) + " over relu and tanh 2x32 nets"};
}

bool same_trajectory(const deep::Trainer& a, const deep::Trainer& b) {
  if (a.loss_trace() != b.loss_trace()) return false;
  if (a.buffer().size() != b.buffer().size()) return false;
  for (std::size_t i = 0; i < a.buffer().size(); ++i) {
    if (a.buffer().action_at(i) != b.buffer().action_at(i)) return false;
    if (a.buffer().reward_at(i) != b.buffer().reward_at(i)) return false;
  }
  return a.online() == b.online();
}

Verdict c5() {
  auto base = [] {
    deep::TrainerConfig c;
    c.hidden = {16};
    c.initial_samples = 64;
    c.target_period = 50;
    c.epsilon.duration = 500;
    return c;
  };
  auto run_pair = [](const deep::TrainerConfig& x, const deep::TrainerConfig& y) {
    deep::Trainer a(x, slip_grid(), 11);
    deep::Trainer b(y, slip_grid(), 11);
    while (a.gradient_steps() < 1000) {
      a.env_step();
      b.env_step();
    }
    return same_trajectory(a, b);
  };

  deep::TrainerConfig dqn = base();
  dqn.combiner = CombinerKind::target_only;
  deep::TrainerConfig maxmin = base();
  maxmin.kind = deep::LearnerKind::maxmin_dqn;
  maxmin.ensemble_size = 1;
  maxmin.combiner = CombinerKind::target_only;
  const bool r1 = run_pair(maxmin, dqn);

  deep::TrainerConfig minto = base();
  minto.combiner = CombinerKind::min;
  minto.target_period = 1;
  deep::TrainerConfig dqn1 = dqn;
  dqn1.target_period = 1;
  const bool r2 = run_pair(minto, dqn1);

  deep::TrainerConfig fr = base();
  fr.kind = deep::LearnerKind::fr_dqn;
  fr.kappa = 0.0;
  fr.combiner = CombinerKind::online_only;
  deep::TrainerConfig online = base();
  online.combiner = CombinerKind::online_only;
  const bool r3 = run_pair(fr, online);

  auto word = [](bool b) { return b ? "identical" : "differ"; };
  return {r1 && r2 && r3, std::string("maxmin(N=1) vs target_only ") + word(r1) + ", min with T=1 vs target_only " +
                              word(r2) + ", fr(kappa=0) vs online_only " + word(r3) + " (1000 updates)"};
}

Verdict c6() {
  Stopwatch w;
  auto doc = repro::grid_config("minto_vs_dqn");
  doc["experiments"][0]["name"] = "accept6";
  doc["experiments"][0]["combiners"] = {"min", "target_only", "max"};
  const auto config = runner::parse_config(doc);
  const fs::path out = scratch("c6");
  std::ostringstream log;
  if (runner::run_grid(config, {out, 1, false}, log) != 0) return {false, "grid run failed: " + log.str()};
  const auto table = csv::read_table(out / "aggregate" / "auc.csv");
  const auto group = *table.column("group");
  const auto value = *table.column("auc_iqm");
  std::map<std::string, double> auc;
  for (const auto& row : table.rows) auc[row[group]] = std::stod(row[value]);
  const double mn = auc.at("dqn_combiner:min");
  const double tg = auc.at("dqn_combiner:target_only");
  const double mx = auc.at("dqn_combiner:max");
  const double secs = w.seconds();
  fs::remove_all(out);
  const bool ok = mn >= 0.95 * tg && mx < tg && secs < 1800.0;
  return {ok, "pooled AUC IQM min " + fmt(mn) + ", target_only " + fmt(tg) + ", max " + fmt(mx) + ", " +
                  std::to_string(config.experiments[0].seeds.size()) + " seeds, " + fmt(secs) + " s"};
}

Verdict c7() {
  studies::CqlConfig cfg;
  int lower = 0;
  double q01 = 0.0;
  double q0 = 0.0;
  bool stable = true;
  double max_loss = 0.0;
  for (int s = 0; s < cfg.seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto a = studies::cql_run(cfg, seed, 0.1, CombinerKind::target_only);
    const auto b = studies::cql_run(cfg, seed, 0.0, CombinerKind::target_only);
    const auto m = studies::cql_run(cfg, seed, 0.1, CombinerKind::min);
    lower += a.mean_q_absent < b.mean_q_absent;
    q01 += a.mean_q_absent / cfg.seeds;
    q0 += b.mean_q_absent / cfg.seeds;
    stable = stable && m.finite && std::isfinite(m.max_loss) && m.max_loss < 1e3;
    max_loss = std::max(max_loss, m.max_loss);
  }
  const bool ok = q01 < q0 && lower == cfg.seeds && stable;
  return {ok, "absent-pair mean Q alpha=0.1 " + fmt(q01) + " vs alpha=0 " + fmt(q0) + ", lower on " +
                  std::to_string(lower) + "/" + std::to_string(cfg.seeds) + " seeds, cql+min max loss " +
                  fmt(max_loss) + (stable ? " finite" : " DIVERGED")};
}

Verdict c8() {
  studies::SelectionConfig cfg;
  const auto r = studies::selection_study(cfg);
  double worst_sync = 0.0;
  for (double v : r.first_after_sync) worst_sync = std::max(worst_sync, std::abs(v));
  const auto smooth = studies::moving_average(r.ratio, 5);
  const std::size_t half = smooth.size() / 2;
  int drops = 0;
  std::size_t first_drop = 0;
  for (std::size_t i = 1; i <= half && i < smooth.size(); ++i) {
    if (smooth[i] < smooth[i - 1]) {
      if (drops++ == 0) first_drop = i;
    }
  }
  const bool ok = worst_sync == 0.0 && drops == 0 && !r.first_after_sync.empty();
  std::string detail = "syncs " + std::to_string(r.first_after_sync.size()) + ", max ratio at sync " +
                       fmt(worst_sync) + ", smoothed decreases in first half " + std::to_string(drops);
  if (drops > 0) detail += " (first at interval " + std::to_string(first_drop) + ")";
  return {ok, detail};
}

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

Verdict c9() {
  RngStream rng(9, StreamId::property);
  double worst = 0.0;
  for (int trial = 0; trial < 10'000; ++trial) {
    std::vector<double> xs(1 + rng.uniform_int(64));
    for (auto& x : xs) x = rng.uniform(-100, 100);
    worst = std::max(worst, std::abs(metrics::iqm(xs) - iqm_oracle(xs)));
  }

  const int epochs = 50;
  std::vector<double> ramp;
  for (int e = 0; e < epochs; ++e) ramp.push_back(static_cast<double>(e) / (epochs - 1));
  const double ramp_err = std::abs(metrics::auc(ramp) - 0.5);

  auto mean_width = [&](int seeds) {
    double total = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
      metrics::CurveSet set;
      set.scores.assign(1, {});
      set.anchors = {metrics::Anchor{0.0, 1.0}};
      for (int s = 0; s < seeds; ++s) set.scores[0].push_back({rng.normal(0.5, 0.1)});
      RngStream boot(static_cast<std::uint64_t>(r), StreamId::bootstrap);
      const auto ci = metrics::bootstrap_ci(set, boot);
      total += ci[0].high - ci[0].low;
    }
    return total / reps;
  };
  const double ratio = mean_width(5) / mean_width(20);

  const bool ok = worst <= 1e-12 && ramp_err <= 1.0 / (2 * epochs) && std::abs(ratio - 2.0) <= 0.3;
  return {ok, "iqm max error " + fmt(worst) + " over 1e4 lists, ramp auc error " + fmt(ramp_err) +
                  ", bootstrap width ratio 5 vs 20 seeds " + fmt(ratio)};
}

Verdict c10() {
  int compared = 0;
  int differing = 0;
  for (const std::string name : {"operator_ablation", "offline_cql"}) {
    const auto config = runner::parse_config(repro::grid_config(name, true));
    const fs::path a = scratch("c10a");
    const fs::path b = scratch("c10b");
    std::ostringstream log;
    if (runner::run_grid(config, {a, 1, false}, log) != 0 || runner::run_grid(config, {b, 2, false}, log) != 0) {
      return {false, name + " grid run failed: " + log.str()};
    }
    for (const auto& dir : {fs::path("results"), fs::path("aggregate")}) {
      for (const auto& e : fs::directory_iterator(a / dir)) {
        ++compared;
        differing += slurp(e.path()) != slurp(b / dir / e.path().filename());
      }
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " csv files compared across two runs, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> which;
  app.add_option("criteria", which, "criterion numbers (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  const std::vector<std::function<Verdict()>> checks{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10};
  int failed = 0;
  for (int n : which) {
    Verdict v;
    try {
      v = checks[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

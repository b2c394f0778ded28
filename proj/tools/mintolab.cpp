// mintolab: run experiment grids, canned reproductions and plots.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "minto/plots.hpp"
#include "minto/repro.hpp"
#include "minto/runner.hpp"

namespace {

int usage_error(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace minto;
  CLI::App app{"Target-network combination experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> parallelism;
  bool no_plots = false;
  auto* run = app.add_subcommand("run", "Run every (cell, seed) of an experiment grid");
  run->add_option("config", config_path, "Config JSON")->required();
  run->add_option("--parallelism", parallelism, "Worker threads");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--no-plots", no_plots, "Skip SVG emission");

  std::string repro_name;
  std::optional<std::string> repro_out;
  std::optional<int> repro_par;
  bool repro_smoke = false;
  auto* repro = app.add_subcommand("repro", "Run a canned desk-scale study");
  repro->add_option("name", repro_name, "Study name")->required();
  repro->add_flag("--smoke", repro_smoke, "Tiny budget for a quick end-to-end check");
  repro->add_option("--out", repro_out, "Output directory");
  repro->add_option("--parallelism", repro_par, "Worker threads");

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "Emit SVG plots from an artifact directory");
  plot->add_option("dir", plot_dir, "Artifact directory")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_path, "Config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      const auto config = runner::load_config(config_path);
      auto options = runner::resolve_options(config, out_dir, parallelism);
      options.plots = !no_plots;
      return runner::run_grid(config, options, std::cout);
    }
    if (*repro) {
      return repro::run(repro_name, repro_out, repro_par, std::cout, repro_smoke);
    }
    if (*plot) {
      const int n = plots::emit_plots(plot_dir, std::cerr);
      std::cout << n << " plots written to " << plot_dir << "/plots\n";
      return 0;
    }
    if (*validate) {
      const auto config = runner::load_config(validate_path);
      const auto cells = runner::expand_cells(config);
      std::size_t runs = 0;
      for (const auto& c : cells) runs += c.experiment->seeds.size();
      std::cout << "ok: " << cells.size() << " cells, " << runs << " runs, config hash " << runner::config_hash(config)
                << "\n";
      return 0;
    }
  } catch (const runner::ConfigError& e) {
    return usage_error(e.what());
  } catch (const repro::UnknownStudy& e) {
    return usage_error(e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

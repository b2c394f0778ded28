#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minto/deep.hpp"
#include "minto/envs.hpp"

namespace minto::runner {

/// Invalid configuration. `field` is a JSON-pointer-like path such as
/// "experiments[0].seeds".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct EnvEntry {
  std::string name;
  nlohmann::json spec;  // canonical, defaults filled in, includes "type"
  int max_episode_steps = 100;
};

/// Offline training data, regenerated per seed from the dataset stream.
struct OfflineSpec {
  std::size_t size = 5000;
  double behavior_epsilon = 0.7;
  int max_episode_steps = 50;
};

struct LearnerEntry {
  std::string name;
  deep::TrainerConfig trainer;
};

struct ExperimentSpec {
  std::string name;
  std::vector<EnvEntry> envs;
  std::vector<LearnerEntry> learners;
  /// Empty means "use each learner's own combiner".
  std::vector<CombinerKind> combiners;
  std::vector<std::uint64_t> seeds;
  int epochs = 10;
  long steps_per_epoch = 1000;
  int eval_episodes = 10;
  std::optional<OfflineSpec> offline;
};

struct GridConfig {
  std::vector<ExperimentSpec> experiments;
  std::string output_dir = "results";
  int parallelism = 1;
  int bootstrap_resamples = 2000;
  double bootstrap_level = 0.95;
};

GridConfig parse_config(const nlohmann::json& doc);
GridConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of everything that affects results (output directory and
/// parallelism excluded), with defaults filled in.
nlohmann::json canonical_json(const GridConfig& config);
/// 16 hex digits; changes iff canonical_json changes.
std::string config_hash(const GridConfig& config);

EnvEntry parse_env(const nlohmann::json& j, const std::string& field);
deep::TrainerConfig parse_trainer(const nlohmann::json& j, const std::string& field);
nlohmann::json trainer_to_json(const deep::TrainerConfig& config);

/// Environment instance for an env entry. Tabular types (gridworld, garnet,
/// noisy, mdp) use one-hot observations.
std::unique_ptr<deep::Environment> make_environment(const EnvEntry& env);

/// Replay buffer holding an offline dataset as one-hot transitions.
deep::ReplayBuffer dataset_to_buffer(const OfflineDataset& dataset, const deep::TabularEnvironment& env);
/// Dataset from an epsilon-greedy policy around value_iteration's Q*.
OfflineDataset make_offline_dataset(const deep::TabularEnvironment& env, const OfflineSpec& spec,
                                    std::uint64_t seed);

struct Cell {
  std::string config_id;
  const ExperimentSpec* experiment = nullptr;
  const EnvEntry* env = nullptr;
  const LearnerEntry* learner = nullptr;
  CombinerKind combiner = CombinerKind::target_only;
  deep::TrainerConfig trainer;  // learner config with the cell's combiner applied
};

std::vector<Cell> expand_cells(const GridConfig& config);

struct RunOutcome {
  std::vector<deep::EpochRow> rows;
  std::optional<std::string> error;
};

/// Runs one (cell, seed) to completion; numeric failures are captured in
/// `error` rather than thrown.
RunOutcome run_cell(const Cell& cell, std::uint64_t seed);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

std::string result_file_name(const std::string& config_id, std::uint64_t seed);
/// Result CSV text for one (cell, seed); wall-clock times are excluded.
std::string result_csv(const std::string& config_id, std::uint64_t seed, const std::vector<deep::EpochRow>& rows);

struct RunOptions {
  std::filesystem::path out_dir;
  int parallelism = 1;
  bool plots = true;
};

/// Resolves output directory and parallelism: explicit CLI values win, then
/// MINTO_OUT_DIR / MINTO_PARALLELISM, then the config.
RunOptions resolve_options(const GridConfig& config, const std::optional<std::string>& cli_out,
                           std::optional<int> cli_parallelism);

/// Executes every (cell, seed), then writes aggregates, plots and the
/// manifest. Returns 0 on success and 1 when any cell failed.
int run_grid(const GridConfig& config, const RunOptions& options, std::ostream& log);

/// Writes aggregate CSVs under out_dir/aggregate from results on disk.
void write_aggregates(const GridConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Compile-time version string.
std::string code_version();

}  // namespace minto::runner

#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace minto::repro {

class UnknownStudy : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// operator_ablation, minto_vs_dqn, minto_vs_baselines, offline_cql,
/// tabular_convergence, appendix_a_checks.
const std::vector<std::string>& names();

/// Grid config of a deep study (the four deep names above). Smoke scale keeps
/// the structure but shrinks seeds and epochs.
nlohmann::json grid_config(const std::string& name, bool smoke = false);

/// Runs the named study into out_dir (default: $MINTO_OUT_DIR or
/// repro/<name>). Returns the process exit code.
int run(const std::string& name, const std::optional<std::string>& out_dir, std::optional<int> parallelism,
        std::ostream& log, bool smoke = false);

}  // namespace minto::repro

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lobmf/presets.hpp"

namespace lobmf {

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_nonconvergence = 3, exit_invariant = 4 };

struct Tolerances {
  double picard = 1e-3;
  int max_picard = 25;
  double deviation = 1e-6;  // Nash check, relative to the largest price
  double z = 3.0;           // standard errors allowed by the statistical checks
  double game = 1e-10;      // best-response stopping rule
};

/// One run of one experiment. Strict JSON: unknown keys are rejected.
/// Coefficient parameters (x0, q0, horizon, ...) live in `params` and
/// override the preset defaults.
struct ExperimentConfig {
  std::string kind;    // bertrand, simulate, value, dpp-check, utility, ito-check, hjb-scan, acceptance
  std::string preset;  // empty picks the default preset of the kind
  Params params;
  std::uint64_t seed = 1;
  std::size_t particles = 8192;
  std::size_t reference_particles = 2048;
  std::size_t steps = 128;
  std::optional<std::vector<double>> q0_law;  // atoms; replaces the preset's initial law
  std::vector<double> policy_family;          // constant levels; empty uses the preset's
  std::vector<double> x_grid;
  std::vector<double> q_grid;
  std::vector<double> l_grid;
  std::vector<double> t_split;
  std::vector<double> deltas;
  std::string phi = "all";
  std::string buy_form = "model";
  Tolerances tolerances;
  std::string out = "out";
  unsigned threads = 1;
  bool write_ensemble = false;
  std::vector<int> criteria;  // acceptance subset

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline bool operator==(const Tolerances& a, const Tolerances& b) {
  return a.picard == b.picard && a.max_picard == b.max_picard && a.deviation == b.deviation && a.z == b.z &&
         a.game == b.game;
}

const std::vector<std::string>& experiment_kinds();
std::string default_preset(const std::string& kind);

ExperimentConfig default_config(const std::string& kind);
/// Throws ValidationError naming the key on bad JSON, unknown keys or
/// out-of-range values.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

struct RunResult {
  int exit_code = exit_ok;
  std::string status;                // ok, check-failed, nonconvergence, invariant-violation
  std::string summary_json;          // also written to <out>/summary.json
  std::vector<std::string> files;    // artifacts written, relative to out
};

/// Validates, runs and writes artifacts into cfg.out. Validation problems
/// throw ValidationError; failures during the run are reported through the
/// exit code and the summary.
RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Catalog lines: name, what the preset exercises, defaults.
std::string describe_presets();

}  // namespace lobmf

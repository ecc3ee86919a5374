#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geb/bikeshare.hpp"
#include "geb/environment.hpp"
#include "geb/matching.hpp"
#include "geb/policy.hpp"
#include "geb/rng.hpp"

namespace geb {

enum class ExperimentKind { trap, synthetic, bikeshare, matching_audit };

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

/// One experiment bundle: which world, which policies, schedule, seeds, and
/// where the artifacts go.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::trap;
  std::vector<Variant> variants{Variant::mg_eucb};
  EpochSchedule schedule;  // tau0 = 50, zeta = 1 defaults
  long n_epochs = 5000;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = ".";
  int workers = 0;  // 0 = runtime default
  std::optional<double> log_coefficient;  // overrides the variant default
  bool debug_indices = false;             // per-edge index columns in traces

  // world parameters
  double epsilon = 0.1;                // trap
  int m = 10;                          // synthetic size
  int n_states = 10;                   // synthetic state-space size
  RewardFamily reward_family = RewardFamily::bernoulli;
  std::uint64_t instance_seed = 12345;  // world draw, shared across seeds
  bool binding_capacities = false;

  // matching audit
  long n_instances = 1000;

  // bikeshare
  std::string trips_csv;  // empty = bundled synthetic 25-station world
  DemandMode demand_mode = DemandMode::static_mean;
  BehaviorModel behavior = BehaviorModel::utility;
  int k_candidates = 5;
  double budget_fraction = 0.01;
};

/// Parses and normalizes a JSON config: defaults filled, ranges checked,
/// unknown keys rejected. Throws std::invalid_argument listing the offense.
RunConfig validate_config(const std::string& json_text);

/// validate_config over a file's contents. Throws if the file is unreadable.
RunConfig load_config(const std::string& path);

std::string config_to_json(const RunConfig& config);

/// Executes all (variant x seed) runs for the configured experiment, writing
/// per-run CSV traces, a seed-aggregated summary (mean and standard error
/// per epoch), and a manifest JSON. Returns the written file paths.
/// Timestamps appear only in the manifest, so reruns with identical config
/// and seeds reproduce byte-identical CSV bodies.
std::vector<std::string> run_experiment(const RunConfig& config);

/// Random capacitated instance for audits and property tests: random shape,
/// random classes with random capacities (possibly binding), U[0,1] weights.
MatchingInstance random_instance(Rng& rng, int max_agents, int max_incentives);

/// RFC-4180 field quoting: wraps in double quotes (doubling inner quotes)
/// only when the value contains a comma, quote, or newline.
std::string csv_field(const std::string& value);

/// Fixed shortest-roundtrip decimal formatting used in every CSV body.
std::string format_number(double value);

}  // namespace geb

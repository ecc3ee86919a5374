#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "geb/environment.hpp"
#include "geb/markov.hpp"
#include "geb/matching.hpp"
#include "geb/policy.hpp"
#include "geb/rng.hpp"

namespace geb {

struct Station {
  int id = 0;
  double x = 0.0;  // planar meters, or longitude when geographic
  double y = 0.0;  // planar meters, or latitude when geographic
  long supply = 0;
};

/// Persistent origin-destination demand stream. Flows, not individual riders,
/// are the bandit agents, so arm statistics accumulate across epochs.
struct FlowDemand {
  int origin = 0;
  int dest = 0;
  double mean_rate = 0.0;
};

/// Rider behaviour per latent flow state: a distance ceiling in meters and an
/// acceptance probability.
struct BehavioralParams {
  std::vector<double> threshold_m;  // per state, in [0, 4000]
  std::vector<double> accept_p;     // per state, in [0, 1]
};

enum class DemandMode { static_mean, poisson };
enum class BehaviorModel { bernoulli, utility };

const char* to_string(DemandMode mode);
const char* to_string(BehaviorModel model);
DemandMode demand_mode_from_string(const std::string& name);
BehaviorModel behavior_model_from_string(const std::string& name);

struct BikeshareWorld {
  std::vector<Station> stations;
  std::vector<FlowDemand> flows;
  std::vector<TransitionKernel> flow_kernels;     // one per flow, shared by its arms
  std::vector<BehavioralParams> behavior_params;  // one per flow
  std::vector<int> flow_states;                   // current latent state per flow
  DemandMode demand_mode = DemandMode::static_mean;
  BehaviorModel behavior = BehaviorModel::utility;
  bool geographic = false;  // haversine on (lon, lat) instead of Euclidean
  int k_candidates = 5;
  double budget_fraction = 0.01;

  double distance(int station_a, int station_b) const;
  long total_bikes() const;
  /// k nearest stations to the flow's intended destination, excluding the
  /// destination itself, nearest first (ties by station index).
  std::vector<int> candidate_stations(int flow) const;

  std::string to_json_string() const;
  static BikeshareWorld from_json_string(const std::string& text);
};

struct IngestResult {
  std::vector<Station> stations;
  std::vector<FlowDemand> flows;
  long days = 0;
  long rows_used = 0;
  long rows_skipped = 0;
};

/// Builds flows from a trips CSV with columns start_station_id,
/// end_station_id, start_time (ISO-8601), start_lat, start_lon, end_lat,
/// end_lon. Rows outside the [window_start_hour, window_end_hour) local-time
/// window are dropped; mean_rate = in-window trips per ordered pair divided
/// by the number of distinct in-window days. Station supply = base * scale.
IngestResult ingest_trips(std::istream& csv, int window_start_hour = 12,
                          int window_end_hour = 13, long base_supply = 10,
                          double supply_scale = 2.0);

/// Completes an ingest result into a world: one small aperiodic irreducible
/// latent kernel per flow, behavioural parameters drawn uniformly per state.
BikeshareWorld world_from_ingest(const IngestResult& ingest, DemandMode demand,
                                 BehaviorModel behavior, std::uint64_t seed,
                                 int n_states = 5);

/// The bundled 25-station planar benchmark world: a balanced perimeter
/// circulation plus one structurally starving hub that only redirected trips
/// can resupply, so incentive quality separates the comparison runs.
BikeshareWorld synthetic_grid_world(std::uint64_t seed);

/// Per-flow request counts for one epoch: round-half-even of the mean rate
/// in static mode, Poisson draws in poisson mode.
std::vector<long> sample_demand(const BikeshareWorld& world, Rng& rng);

/// One epoch's matching instance. Agents are the highest-demand active flows
/// capped at floor(budget_fraction * total requests); incentives are the
/// union of their candidate stations; classes group edges by candidate
/// station with capacity one redirect per epoch.
struct EpochInstance {
  std::vector<int> agent_flows;         // roster, agent row -> flow index
  std::vector<int> incentive_stations;  // incentive column -> station index
  std::vector<MatchingInstance> shape_storage;  // empty or one instance

  bool empty() const { return shape_storage.empty(); }
  const MatchingInstance& shape() const { return shape_storage.front(); }
};

EpochInstance build_epoch_instance(const BikeshareWorld& world,
                                   const std::vector<long>& requests);

struct BikeshareEpochStats {
  long served = 0;
  long rejected = 0;
  long offered = 0;
  long accepted = 0;

  double efficiency() const;
};

/// Resolves the matched incentive offers once per iteration (driving the
/// latent states and the bandit reward averages), then routes the epoch's
/// demand: each served trip moves one bike from its origin to its realized
/// destination; a matched flow redirects at most one accepted trip to its
/// candidate station. Origins with no supply reject the trip.
EpochResult play_bikeshare_epoch(BikeshareWorld& world,
                                 const EpochInstance& instance,
                                 const Matching& matching,
                                 const std::vector<long>& requests, long tau,
                                 Rng& rng, BikeshareEpochStats& stats);

/// Expected one-shot offer reward for redirecting `flow` to `station` given
/// the flow's current latent state and the world's behaviour model.
double expected_offer_reward(const BikeshareWorld& world, int flow, int station,
                             int state);

enum class BikeshareMode { learned, full_information, no_incentive };

const char* to_string(BikeshareMode mode);

struct BikeshareTrace {
  std::vector<double> efficiency;
  std::vector<double> mean_reward;  // realized mean incentive reward per epoch
  std::vector<long> served, rejected, offered, accepted;
  std::vector<long> total_bikes;  // conservation audit at epoch boundaries
};

/// One policy mode over n_epochs. The learned mode runs an epoch-mixing UCB
/// with per-arm statistics keyed by (flow, candidate station) that persist
/// across epochs; full_information re-weights edges each epoch with the exact
/// expected offer reward at the true current state; no_incentive plays the
/// empty matching.
BikeshareTrace run_bikeshare_mode(BikeshareWorld world, BikeshareMode mode,
                                  const EpochSchedule& schedule, long n_epochs,
                                  Rng rng, double log_coefficient = 3.0);

struct BikeshareComparison {
  BikeshareTrace learned;
  BikeshareTrace full_information;
  BikeshareTrace no_incentive;
};

/// Three coupled runs from rng streams derived from one master seed, each on
/// its own copy of the world.
BikeshareComparison run_bikeshare(const BikeshareWorld& world,
                                  const EpochSchedule& schedule, long n_epochs,
                                  std::uint64_t master_seed);

}  // namespace geb

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geb/markov.hpp"
#include "geb/matching.hpp"
#include "geb/rng.hpp"

namespace geb {

/// Per-state reward law, supported on [0,1].
struct RewardDistribution {
  enum class Kind { bernoulli, uniform, beta, deterministic };
  Kind kind = Kind::deterministic;
  double a = 0.0;  // p | lo | alpha | value
  double b = 0.0;  // - | hi | beta  | -

  static RewardDistribution bernoulli(double p);
  static RewardDistribution uniform(double lo, double hi);
  static RewardDistribution beta(double alpha, double beta);
  static RewardDistribution deterministic(double v);

  double mean() const;
  double sample(Rng& rng) const;
};

/// One arm (edge): the transition kernel driving the agent's state while the
/// edge is played plus one reward distribution per state.
struct ArmModel {
  TransitionKernel kernel;
  std::vector<RewardDistribution> rewards_by_state;
};

/// The simulated world: one arm per (agent, incentive) edge; the state lives
/// on the agent and is shared by all of that agent's arms.
class EnvironmentModel {
 public:
  EnvironmentModel(int m_agents, int m_incentives,
                   std::vector<int> state_space_sizes, std::vector<ArmModel> arms,
                   std::vector<int> initial_states);

  int agents() const { return m_agents_; }
  int incentives() const { return m_incentives_; }
  int state_space_size(int agent) const { return state_space_sizes_[agent]; }
  const ArmModel& arm(Edge e) const {
    return arms_[static_cast<std::size_t>(e.agent) * m_incentives_ + e.incentive];
  }
  int current_state(int agent) const { return current_states_[agent]; }
  void set_current_state(int agent, int state);
  long clock() const { return clock_; }
  void advance_clock(long dt) { clock_ += dt; }

  std::string to_json_string() const;
  static EnvironmentModel from_json_string(const std::string& text);

 private:
  int m_agents_;
  int m_incentives_;
  std::vector<int> state_space_sizes_;
  std::vector<ArmModel> arms_;  // row-major over edges
  std::vector<int> current_states_;
  long clock_ = 0;
};

/// Outcome of replaying one matching for an epoch.
struct EpochResult {
  std::vector<std::pair<Edge, double>> edge_means;  // per-edge time average
  long iterations_used = 0;
  long start_time = 0;
};

/// Ends an epoch once the matching's running time-average reward has moved
/// by at most delta for `patience` consecutive iterations.
struct EarlyStop {
  double delta = 5e-4;
  int patience = 200;
};

/// Plays `matching` for up to tau iterations: each iteration draws a reward
/// from the matched agent's current state and then advances that state by
/// the edge kernel. Unmatched agents keep their state frozen.
EpochResult play_epoch(EnvironmentModel& env, const Matching& matching, long tau,
                       Rng& rng, const std::optional<EarlyStop>& early_stop = {});

/// Expected reward of the edge under its kernel's stationary distribution.
double stationary_mean(const EnvironmentModel& env, Edge edge);

struct World {
  EnvironmentModel env;
  MatchingInstance instance;  // weights set to the stationary means
};

/// The two-agent, two-incentive, two-state construction where classical UCB
/// converges to the sub-optimal matching (single class, capacity 2).
World trap_world(double epsilon);

enum class RewardFamily { bernoulli, uniform, beta, mixed };

/// Random world: per-edge kernels are row-normalized positive matrices
/// (validated, resampled on failure), rewards drawn per family.
World generate_synthetic(int m, int n_states, RewardFamily family,
                         std::uint64_t seed);

const char* to_string(RewardFamily family);
RewardFamily reward_family_from_string(const std::string& name);

}  // namespace geb

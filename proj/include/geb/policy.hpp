#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geb/environment.hpp"
#include "geb/matching.hpp"
#include "geb/rng.hpp"

namespace geb {

/// Linearly growing epoch lengths tau_k = tau0 + zeta * k (k from 0).
struct EpochSchedule {
  long tau0 = 50;
  long zeta = 1;
  std::optional<EarlyStop> early_stop;

  long tau(long k) const { return tau0 + zeta * k; }
};

enum class Variant { mg_eucb, mg_eucb_plus, h_eucb, h_eucb_plus, c_ucb };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);

/// 6 for the base variants, 3 for the tuned "+" variants.
double default_log_coefficient(Variant v);

struct PolicyConfig {
  Variant variant = Variant::mg_eucb;
  double log_coefficient = 6.0;
  // Per-edge mixing constants C_{a,i}; empty means zero (pure sub-Gaussian
  // index).
  std::vector<double> mixing_constants;
  // Store the per-edge selection indices in every epoch record (debug aid).
  bool record_indices = false;

  static PolicyConfig make(Variant v);
  /// Fills mixing_constants from the arms' spectral profiles.
  static PolicyConfig make(Variant v, const EnvironmentModel& env);
};

/// Markov-bias share of the confidence window after k pulls:
/// (c_mix/2) (1/(zeta+tau0) + (1/zeta) ln(1 + k zeta / tau0)),
/// degenerating to (c_mix/2) k/tau0 when zeta = 0.
double q_constant(double c_mix, long k, const EpochSchedule& schedule);

/// Q(k)/k + sqrt((L ln t + 4 ln m)/k) with t the epoch index.
double confidence_value(double c_mix, long k, long t, int m, double log_coef,
                        const EpochSchedule& schedule);

struct BanditState {
  std::vector<double> cum_reward;      // sum of per-epoch time averages
  std::vector<long> pulls;             // initialized to 1 per edge
  long epoch = 0;                      // completed epochs
  long clock = 0;                      // completed iterations
  std::vector<Matching> cover_queue;   // remaining initialization matchings
  std::size_t cover_next = 0;

  bool cover_done() const { return cover_next >= cover_queue.size(); }
};

BanditState init_state(const MatchingInstance& shape);

double confidence(Edge edge, const BanditState& state, const PolicyConfig& config,
                  const EpochSchedule& schedule, const MatchingInstance& shape);

/// Next cover matching while initialization lasts; afterwards the greedy (or
/// Hungarian, for the H variants) matching on empirical mean + confidence.
Matching select(const BanditState& state, const PolicyConfig& config,
                const MatchingInstance& shape, const EpochSchedule& schedule);

void update(BanditState& state, const Matching& matching,
            const EpochResult& result, const MatchingInstance& shape);

/// One epoch of a run. For the per-iteration C-UCB baseline the epochs are
/// reporting buckets; `selections` then holds every distinct matching chosen
/// within the bucket with its iteration count.
struct EpochRecord {
  long epoch = 0;
  long clock_start = 0;
  long iterations = 0;
  double realized = 0.0;  // epoch reward: sum over matched edges of time averages
  std::vector<std::pair<Matching, long>> selections;
  std::vector<double> indices;  // per-edge selection index, when recorded
};

struct RunTrace {
  std::vector<EpochRecord> epochs;
};

/// Full loop: initialization cover, then select/play/update for n_epochs.
/// The C-UCB variant instead re-selects a matching every iteration with the
/// classical index and reports per-epoch aggregates.
RunTrace run(EnvironmentModel& env, const MatchingInstance& shape,
             const PolicyConfig& config, const EpochSchedule& schedule,
             long n_epochs, Rng& rng);

}  // namespace geb

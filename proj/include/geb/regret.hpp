#pragma once

#include <optional>
#include <vector>

#include "geb/environment.hpp"
#include "geb/matching.hpp"
#include "geb/policy.hpp"

namespace geb {

/// The offline reference: greedy matching on the stationary mean rewards.
struct Benchmark {
  std::vector<Edge> g_star;        // greedy order, nonincreasing mu
  std::vector<double> mu;          // per edge, row-major
  std::vector<int> i_star;         // per agent; -1 for unmatched (dummy, mu 0)
  InfeasibilityDecomposition decomposition;
  double epoch_value = 0.0;        // sum of mu over g_star

  bool is_g_star(const Matching& m) const;
};

/// Per-edge reward gaps and sub-optimal-set membership. The gap of the
/// top greedy edge is undefined and stored absent; benchmark edges are kept
/// out of the sub-optimal set (their per-agent gap is zero by definition).
struct GapTable {
  std::vector<std::optional<double>> delta;  // per edge
  std::vector<bool> in_s;                    // per edge
};

struct RegretTrace {
  std::vector<double> realized;        // per-epoch realized matching reward
  std::vector<double> benchmark;       // constant stationary benchmark value
  std::vector<double> optimal_fraction;  // share of the epoch spent on g_star
  std::vector<double> cumulative;      // signed cumulative regret
};

Benchmark build_benchmark(const EnvironmentModel& env,
                          const MatchingInstance& shape);

GapTable gaps(const Benchmark& benchmark, const MatchingInstance& shape);

RegretTrace regret_of(const RunTrace& trace, const Benchmark& benchmark);

/// Regret decomposition bound: sum over the sub-optimal set of
/// E[T] (Delta + C/tau0) plus the mixing tail m C*/zeta (1 + ln(...)).
double pull_decomposition_bound(const GapTable& gap_table, const std::vector<double>& pull_counts,
                   const std::vector<double>& mixing_constants,
                   const EpochSchedule& schedule, long n, int m);

/// rho_{a,i} = (zeta/(zeta+tau0) + 1) C_{a,i} / (2 sqrt(zeta)).
double rho_constant(double c_mix, const EpochSchedule& schedule);

/// Uniform bound on the expected number of selections of any sub-optimal
/// edge, driven by the argmax edge over P minus the top greedy edge.
double selection_count_bound(const GapTable& gap_table,
                  const std::vector<double>& mixing_constants,
                  const EpochSchedule& schedule, long n, int m,
                  const Benchmark& benchmark, const MatchingInstance& shape);

/// Composition: the pull decomposition evaluated at the uniform selection-count bound.
double worst_case_regret_bound(const GapTable& gap_table,
                        const std::vector<double>& mixing_constants,
                        const EpochSchedule& schedule, long n, int m,
                        const Benchmark& benchmark, const MatchingInstance& shape);

/// Epoch selection counts per edge accumulated from a trace (fractional for
/// the per-iteration baseline).
std::vector<double> pull_counts(const RunTrace& trace, const MatchingInstance& shape);

}  // namespace geb

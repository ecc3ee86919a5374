#include "geb/regret.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geb {

bool Benchmark::is_g_star(const Matching& m) const {
  Matching g{g_star};
  return g.same_edges(m);
}

Benchmark build_benchmark(const EnvironmentModel& env,
                          const MatchingInstance& shape) {
  Benchmark b;
  b.mu.resize(shape.num_edges());
  for (int idx = 0; idx < shape.num_edges(); ++idx)
    b.mu[idx] = stationary_mean(env, shape.edge_at(idx));
  MatchingInstance weighted = shape.with_weights(b.mu);
  b.decomposition = decompose(weighted);
  b.g_star = b.decomposition.greedy_edges;
  b.i_star.assign(shape.agents(), -1);
  for (Edge e : b.g_star) {
    b.i_star[e.agent] = e.incentive;
    b.epoch_value += b.mu[shape.edge_index(e)];
  }
  return b;
}

GapTable gaps(const Benchmark& benchmark, const MatchingInstance& shape) {
  GapTable out;
  out.delta.assign(shape.num_edges(), std::nullopt);
  out.in_s.assign(shape.num_edges(), false);
  std::vector<int> gstar_rank(shape.num_edges(), -1);
  for (std::size_t j = 0; j < benchmark.g_star.size(); ++j)
    gstar_rank[shape.edge_index(benchmark.g_star[j])] = static_cast<int>(j);
  // L^{-1}: marginal-set membership maps each non-greedy edge to its anchor.
  std::vector<int> anchor(shape.num_edges(), -1);
  for (std::size_t j = 0; j < benchmark.decomposition.marginal_sets.size(); ++j)
    for (Edge e : benchmark.decomposition.marginal_sets[j])
      anchor[shape.edge_index(e)] = static_cast<int>(j);

  for (int idx = 0; idx < shape.num_edges(); ++idx) {
    Edge e = shape.edge_at(idx);
    int rank = gstar_rank[idx];
    if (rank == 0) continue;  // gap of the top greedy edge is undefined
    if (rank > 0) {
      int prev = shape.edge_index(benchmark.g_star[rank - 1]);
      out.delta[idx] = benchmark.mu[prev] - benchmark.mu[idx];
      continue;
    }
    double mu_star = benchmark.i_star[e.agent] >= 0
                         ? benchmark.mu[shape.edge_index(
                               {e.agent, benchmark.i_star[e.agent]})]
                         : 0.0;  // dummy incentive carries zero reward
    if (mu_star >= benchmark.mu[idx]) {
      out.in_s[idx] = true;
      out.delta[idx] = mu_star - benchmark.mu[idx];
    } else if (anchor[idx] >= 0 &&
               anchor[idx] < static_cast<int>(benchmark.g_star.size())) {
      int g = shape.edge_index(benchmark.g_star[anchor[idx]]);
      out.delta[idx] = benchmark.mu[g] - benchmark.mu[idx];
    }
  }
  return out;
}

RegretTrace regret_of(const RunTrace& trace, const Benchmark& benchmark) {
  RegretTrace out;
  double cum = 0.0;
  for (const EpochRecord& rec : trace.epochs) {
    long total = 0, optimal = 0;
    for (const auto& [m, count] : rec.selections) {
      total += count;
      if (benchmark.is_g_star(m)) optimal += count;
    }
    out.realized.push_back(rec.realized);
    out.benchmark.push_back(benchmark.epoch_value);
    out.optimal_fraction.push_back(
        total > 0 ? static_cast<double>(optimal) / static_cast<double>(total)
                  : 0.0);
    cum += benchmark.epoch_value - rec.realized;
    out.cumulative.push_back(cum);
  }
  return out;
}

std::vector<double> pull_counts(const RunTrace& trace,
                                const MatchingInstance& shape) {
  std::vector<double> counts(shape.num_edges(), 0.0);
  for (const EpochRecord& rec : trace.epochs)
    for (const auto& [m, count] : rec.selections)
      for (Edge e : m.edges)
        counts[shape.edge_index(e)] += static_cast<double>(count);
  return counts;
}

namespace {

double mixing_tail(double c_star, const EpochSchedule& schedule, long n, int m) {
  const double zeta = static_cast<double>(schedule.zeta);
  const double tau0 = static_cast<double>(schedule.tau0);
  return static_cast<double>(m) * c_star / zeta *
         (1.0 + std::log(zeta * static_cast<double>(n - 1) / tau0 + 1.0));
}

}  // namespace

double pull_decomposition_bound(const GapTable& gap_table, const std::vector<double>& pulls,
                   const std::vector<double>& mixing_constants,
                   const EpochSchedule& schedule, long n, int m) {
  if (schedule.zeta <= 0)
    throw std::invalid_argument("pull_decomposition_bound: requires zeta > 0");
  const double tau0 = static_cast<double>(schedule.tau0);
  double total = 0.0;
  double c_star = 0.0;
  for (std::size_t i = 0; i < gap_table.in_s.size(); ++i) {
    double c = mixing_constants.empty() ? 0.0 : mixing_constants[i];
    if (gap_table.in_s[i]) {
      total += pulls[i] * (gap_table.delta[i].value_or(0.0) + c / tau0);
    } else {
      c_star = std::max(c_star, c);
    }
  }
  return total + mixing_tail(c_star, schedule, n, m);
}

double rho_constant(double c_mix, const EpochSchedule& schedule) {
  const double zeta = static_cast<double>(schedule.zeta);
  const double tau0 = static_cast<double>(schedule.tau0);
  if (schedule.zeta <= 0)
    throw std::invalid_argument("rho_constant: requires zeta > 0");
  return (zeta / (zeta + tau0) + 1.0) * c_mix / (2.0 * std::sqrt(zeta));
}

double selection_count_bound(const GapTable& gap_table,
                  const std::vector<double>& mixing_constants,
                  const EpochSchedule& schedule, long n, int m,
                  const Benchmark& benchmark, const MatchingInstance& shape) {
  if (schedule.zeta <= 0 || schedule.tau0 < 1)
    throw std::invalid_argument("selection_count_bound: requires zeta > 0 and tau0 >= 1");
  const double tau0 = static_cast<double>(schedule.tau0);
  const double explore = std::sqrt(6.0 * std::log(static_cast<double>(n)) +
                                   4.0 * std::log(static_cast<double>(m)));
  int top = benchmark.g_star.empty()
                ? -1
                : shape.edge_index(benchmark.g_star.front());
  double best = -1.0;
  for (int idx = 0; idx < shape.num_edges(); ++idx) {
    if (idx == top) continue;
    if (!gap_table.delta[idx].has_value()) continue;
    double d = *gap_table.delta[idx];
    if (d <= 0.0) continue;  // vacuous gap, excluded
    double c = mixing_constants.empty() ? 0.0 : mixing_constants[idx];
    double rho = rho_constant(c, schedule);
    double term = rho / std::sqrt(tau0) + explore;
    best = std::max(best, 4.0 / (d * d) * term * term);
  }
  if (best < 0.0)
    throw std::runtime_error("selection_count_bound: no edge with a positive gap");
  return static_cast<double>(m) * static_cast<double>(m) * best +
         2.0 * (1.0 + std::log(static_cast<double>(n)));
}

double worst_case_regret_bound(const GapTable& gap_table,
                        const std::vector<double>& mixing_constants,
                        const EpochSchedule& schedule, long n, int m,
                        const Benchmark& benchmark, const MatchingInstance& shape) {
  const double t_bound =
      selection_count_bound(gap_table, mixing_constants, schedule, n, m, benchmark, shape);
  const double tau0 = static_cast<double>(schedule.tau0);
  double total = 0.0;
  double c_star = 0.0;
  for (int idx = 0; idx < shape.num_edges(); ++idx) {
    double c = mixing_constants.empty() ? 0.0 : mixing_constants[idx];
    if (gap_table.in_s[idx]) {
      total += t_bound * (gap_table.delta[idx].value_or(0.0) + c / tau0);
    } else {
      c_star = std::max(c_star, c);
    }
  }
  return total + mixing_tail(c_star, schedule, n, m);
}

}  // namespace geb

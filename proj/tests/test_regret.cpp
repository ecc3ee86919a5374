#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "geb/environment.hpp"
#include "geb/regret.hpp"
#include "geb/rng.hpp"

using namespace geb;

namespace {

RunTrace manual_trace(const std::vector<std::pair<Matching, double>>& epochs) {
  RunTrace t;
  for (std::size_t k = 0; k < epochs.size(); ++k) {
    EpochRecord rec;
    rec.epoch = static_cast<long>(k);
    rec.realized = epochs[k].second;
    if (!epochs[k].first.edges.empty())
      rec.selections.emplace_back(epochs[k].first, 1);
    t.epochs.push_back(std::move(rec));
  }
  return t;
}

}  // namespace

TEST_CASE("the benchmark of the two-agent world is the diagonal matching") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  CHECK(Matching{b.g_star}.same_edges(Matching{{{0, 0}, {1, 1}}}));
  CHECK(b.epoch_value == doctest::Approx(20.0 / 11.0));
  CHECK(b.i_star == std::vector<int>({0, 1}));
  CHECK(b.mu[w.instance.edge_index({0, 0})] == doctest::Approx(10.0 / 11.0));
  CHECK(b.mu[w.instance.edge_index({0, 1})] == doctest::Approx(0.5));
  CHECK(b.is_g_star(Matching{{{1, 1}, {0, 0}}}));  // order-insensitive
  CHECK(!b.is_g_star(Matching{{{0, 1}, {1, 0}}}));
}

TEST_CASE("single-state worlds reduce the benchmark to the weight matrix") {
  MatchingInstance shape =
      MatchingInstance::single_class(2, 2, {0.9, 0.2, 0.3, 0.8}, 2);
  std::vector<ArmModel> arms;
  for (double v : {0.9, 0.2, 0.3, 0.8})
    arms.push_back({TransitionKernel(1, {1.0}),
                    {RewardDistribution::deterministic(v)}});
  EnvironmentModel env(2, 2, {1, 1}, std::move(arms), {0, 0});
  Benchmark b = build_benchmark(env, shape);
  CHECK(Matching{b.g_star}.same_edges(Matching{{{0, 0}, {1, 1}}}));
  CHECK(b.epoch_value == doctest::Approx(1.7));
}

TEST_CASE("agents beyond the incentive budget stay unmatched with a dummy") {
  // three agents, two incentives: greedy matches two agents, one gets -1
  MatchingInstance shape = MatchingInstance::single_class(
      3, 2, {0.9, 0.1, 0.8, 0.2, 0.3, 0.7}, 3);
  std::vector<ArmModel> arms;
  for (double v : {0.9, 0.1, 0.8, 0.2, 0.3, 0.7})
    arms.push_back({TransitionKernel(1, {1.0}),
                    {RewardDistribution::deterministic(v)}});
  EnvironmentModel env(3, 2, {1, 1, 1}, std::move(arms), {0, 0, 0});
  Benchmark b = build_benchmark(env, shape);
  CHECK(b.g_star.size() == 2);
  CHECK(b.i_star[0] == 0);
  CHECK(b.i_star[2] == 1);
  CHECK(b.i_star[1] == -1);
  // the stranded agent's edges still receive gaps through their anchors
  GapTable g = gaps(b, shape);
  for (Edge e : {Edge{1, 0}, Edge{1, 1}}) {
    CHECK(g.delta[shape.edge_index(e)].has_value());
    CHECK(!g.in_s[shape.edge_index(e)]);
  }
}

TEST_CASE("gap table of the two-agent world") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  GapTable g = gaps(b, w.instance);
  // the top greedy edge has no gap; the second greedy edge has a zero gap
  CHECK(!g.delta[w.instance.edge_index({0, 0})].has_value());
  CHECK(g.delta[w.instance.edge_index({1, 1})].has_value());
  CHECK(*g.delta[w.instance.edge_index({1, 1})] == doctest::Approx(0.0));
  CHECK(!g.in_s[w.instance.edge_index({0, 0})]);
  CHECK(!g.in_s[w.instance.edge_index({1, 1})]);
  // the cross edges lose to the agent's benchmark incentive by 9/22
  for (Edge e : {Edge{0, 1}, Edge{1, 0}}) {
    CHECK(g.in_s[w.instance.edge_index(e)]);
    CHECK(*g.delta[w.instance.edge_index(e)] == doctest::Approx(9.0 / 22.0));
  }
}

TEST_CASE("regret accumulates the benchmark shortfall epoch by epoch") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  const double v = b.epoch_value;
  Matching g{{{0, 0}, {1, 1}}};
  Matching cross{{{0, 1}, {1, 0}}};
  RunTrace trace = manual_trace({{g, v}, {cross, 1.0}, {{}, 0.0}});
  RegretTrace reg = regret_of(trace, b);
  CHECK(reg.realized == std::vector<double>({v, 1.0, 0.0}));
  CHECK(reg.benchmark == std::vector<double>({v, v, v}));
  CHECK(reg.optimal_fraction == std::vector<double>({1.0, 0.0, 0.0}));
  CHECK(reg.cumulative[0] == doctest::Approx(0.0));
  CHECK(reg.cumulative[1] == doctest::Approx(v - 1.0));
  CHECK(reg.cumulative[2] == doctest::Approx(2.0 * v - 1.0));
}

TEST_CASE("an over-performing epoch drives signed regret negative") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  RunTrace trace = manual_trace({{Matching{{{0, 0}, {1, 1}}}, 2.0}});
  CHECK(regret_of(trace, b).cumulative[0] ==
        doctest::Approx(b.epoch_value - 2.0));
}

TEST_CASE("long-run realized reward of the competing matching is one") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  Matching cross{{{0, 1}, {1, 0}}};
  Rng rng(9);
  const int reps = 400;
  const long tau = 200;
  double sum = 0.0, sq = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    EnvironmentModel env = w.env;
    EpochResult r = play_epoch(env, cross, tau, rng);
    double realized = 0.0;
    for (const auto& [e, mean] : r.edge_means) realized += mean;
    sum += realized;
    sq += realized * realized;
  }
  const double mean = sum / reps;
  const double se =
      std::sqrt((sq - reps * mean * mean) / (reps - 1) / reps);
  CHECK(std::abs(mean - 1.0) <= 3 * se + 1e-3);
  // so each such epoch adds about 9/11 of regret
  CHECK(b.epoch_value - mean == doctest::Approx(9.0 / 11.0).epsilon(0.05));
}

TEST_CASE("pull counts add selection counts over the trace") {
  World w = trap_world(0.1);
  Matching g{{{0, 0}, {1, 1}}};
  Matching cross{{{0, 1}, {1, 0}}};
  RunTrace trace = manual_trace({{g, 0.0}, {g, 0.0}, {cross, 0.0}});
  std::vector<double> counts = pull_counts(trace, w.instance);
  CHECK(counts[w.instance.edge_index({0, 0})] == doctest::Approx(2.0));
  CHECK(counts[w.instance.edge_index({1, 1})] == doctest::Approx(2.0));
  CHECK(counts[w.instance.edge_index({0, 1})] == doctest::Approx(1.0));
  CHECK(counts[w.instance.edge_index({1, 0})] == doctest::Approx(1.0));
}

TEST_CASE("the decomposition bound with no Markov bias is the gap sum") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  GapTable g = gaps(b, w.instance);
  EpochSchedule sched{50, 1, {}};
  std::vector<double> pulls = {5.0, 7.0, 3.0, 5.0};
  // only the two cross edges are sub-optimal; zero C kills the tail
  CHECK(pull_decomposition_bound(g, pulls, {}, sched, 1000, 2) ==
        doctest::Approx((7.0 + 3.0) * 9.0 / 22.0));
  CHECK_THROWS(pull_decomposition_bound(g, pulls, {}, EpochSchedule{50, 0, {}}, 1000, 2));
}

TEST_CASE("the decomposition bound adds per-pull bias and a mixing tail") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  GapTable g = gaps(b, w.instance);
  EpochSchedule sched{50, 2, {}};
  std::vector<double> pulls = {5.0, 7.0, 3.0, 5.0};
  std::vector<double> c = {0.4, 0.3, 0.2, 0.6};
  const long n = 1000;
  const double expected_in_s = 7.0 * (9.0 / 22.0 + 0.3 / 50.0) +
                               3.0 * (9.0 / 22.0 + 0.2 / 50.0);
  const double c_star = 0.6;  // max over edges outside the sub-optimal set
  const double tail =
      2.0 * c_star / 2.0 * (1.0 + std::log(2.0 * (n - 1) / 50.0 + 1.0));
  CHECK(pull_decomposition_bound(g, pulls, c, sched, n, 2) ==
        doctest::Approx(expected_in_s + tail));
}

TEST_CASE("the rho constant matches its closed form") {
  EpochSchedule sched{50, 2, {}};
  CHECK(rho_constant(1.5, sched) ==
        doctest::Approx((2.0 / 52.0 + 1.0) * 1.5 / (2.0 * std::sqrt(2.0))));
  CHECK(rho_constant(0.0, sched) == doctest::Approx(0.0));
  CHECK_THROWS(rho_constant(1.0, EpochSchedule{50, 0, {}}));
}

TEST_CASE("the uniform selection bound follows the dominant gap") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  GapTable g = gaps(b, w.instance);
  EpochSchedule sched{50, 1, {}};
  const long n = 10000;
  const int m = 2;
  // zero mixing: the worst positive gap is 9/22 on the cross edges
  const double explore =
      std::sqrt(6.0 * std::log(static_cast<double>(n)) + 4.0 * std::log(2.0));
  const double expected =
      4.0 * (4.0 / ((9.0 / 22.0) * (9.0 / 22.0))) * explore * explore +
      2.0 * (1.0 + std::log(static_cast<double>(n)));
  CHECK(selection_count_bound(g, {}, sched, n, m, b, w.instance) ==
        doctest::Approx(expected));
  // more horizon, more allowed selections
  CHECK(selection_count_bound(g, {}, sched, 100 * n, m, b, w.instance) >
        selection_count_bound(g, {}, sched, n, m, b, w.instance));
}

TEST_CASE("the horizon dependence of the selection bound is logarithmic") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  GapTable g = gaps(b, w.instance);
  EpochSchedule sched{50, 1, {}};
  const double at_n = selection_count_bound(g, {}, sched, 100000000L, 2, b, w.instance);
  const double at_n2 =
      selection_count_bound(g, {}, sched, 10000000000000000L, 2, b, w.instance);
  CHECK(at_n2 / at_n == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("the composed regret bound is the decomposition at the uniform pulls") {
  World w = trap_world(0.1);
  Benchmark b = build_benchmark(w.env, w.instance);
  GapTable g = gaps(b, w.instance);
  EpochSchedule sched{50, 2, {}};
  std::vector<double> c = {0.4, 0.3, 0.2, 0.6};
  const long n = 5000;
  const double t_bound = selection_count_bound(g, c, sched, n, 2, b, w.instance);
  std::vector<double> uniform_pulls(4, t_bound);
  CHECK(worst_case_regret_bound(g, c, sched, n, 2, b, w.instance) ==
        doctest::Approx(pull_decomposition_bound(g, uniform_pulls, c, sched, n, 2)));
  // and it dominates the decomposition at any measured pulls below it
  std::vector<double> measured = {10.0, 40.0, 25.0, 12.0};
  CHECK(worst_case_regret_bound(g, c, sched, n, 2, b, w.instance) >=
        pull_decomposition_bound(g, measured, c, sched, n, 2));
}

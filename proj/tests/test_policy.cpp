#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "geb/environment.hpp"
#include "geb/policy.hpp"
#include "geb/regret.hpp"
#include "geb/rng.hpp"

using namespace geb;

namespace {

// one class spanning everything, capacity = number of agents
MatchingInstance full_instance(int agents, int incentives,
                               std::vector<double> weights) {
  return MatchingInstance::single_class(agents, incentives, std::move(weights),
                                        agents);
}

// a single agent choosing between two constant single-state arms
World two_arm_world(double good, double bad) {
  std::vector<ArmModel> arms;
  arms.push_back({TransitionKernel(1, {1.0}),
                  {RewardDistribution::deterministic(good)}});
  arms.push_back({TransitionKernel(1, {1.0}),
                  {RewardDistribution::deterministic(bad)}});
  EnvironmentModel env(1, 2, {1}, std::move(arms), {0});
  return {std::move(env), full_instance(1, 2, {good, bad})};
}

}  // namespace

TEST_CASE("variant names round-trip and carry their tuning") {
  for (Variant v : {Variant::mg_eucb, Variant::mg_eucb_plus, Variant::h_eucb,
                    Variant::h_eucb_plus, Variant::c_ucb})
    CHECK(variant_from_string(to_string(v)) == v);
  CHECK_THROWS(variant_from_string("D_UCB"));
  CHECK(default_log_coefficient(Variant::mg_eucb) == doctest::Approx(6.0));
  CHECK(default_log_coefficient(Variant::mg_eucb_plus) == doctest::Approx(3.0));
  CHECK(default_log_coefficient(Variant::h_eucb_plus) == doctest::Approx(3.0));
}

TEST_CASE("the bias share of the confidence window is computed exactly") {
  EpochSchedule s{1, 1, {}};
  // (2/2) * (1/(1+1) + ln(1 + 1)/1)
  CHECK(q_constant(2.0, 1, s) == doctest::Approx(0.5 + std::log(2.0)));
  CHECK(q_constant(0.0, 5, s) == doctest::Approx(0.0));
  CHECK_THROWS(q_constant(1.0, 0, s));

  // doubling the pulls adds (c/(2 zeta)) ln((tau0+2k zeta)/(tau0+k zeta))
  EpochSchedule s2{7, 3, {}};
  for (long k : {1L, 4L, 100L}) {
    double expect = 1.5 / (2.0 * 3.0) *
                    std::log((7.0 + 2.0 * k * 3.0) / (7.0 + k * 3.0));
    CHECK(q_constant(1.5, 2 * k, s2) - q_constant(1.5, k, s2) ==
          doctest::Approx(expect));
  }

  // constant-length epochs degenerate to a linear ramp
  EpochSchedule flat{10, 0, {}};
  CHECK(q_constant(3.0, 4, flat) == doctest::Approx(0.5 * 3.0 * 4.0 / 10.0));
}

TEST_CASE("the confidence value combines bias and exploration terms") {
  EpochSchedule s{50, 1, {}};
  // no Markov bias: pure sqrt((L ln t + 4 ln m)/k)
  CHECK(confidence_value(0.0, 4, 10, 3, 6.0, s) ==
        doctest::Approx(
            std::sqrt((6.0 * std::log(10.0) + 4.0 * std::log(3.0)) / 4.0)));
  CHECK(confidence_value(0.0, 4, 10, 3, 3.0, s) ==
        doctest::Approx(
            std::sqrt((3.0 * std::log(10.0) + 4.0 * std::log(3.0)) / 4.0)));
  CHECK(confidence_value(2.0, 4, 10, 3, 6.0, s) ==
        doctest::Approx(q_constant(2.0, 4, s) / 4.0 +
                        confidence_value(0.0, 4, 10, 3, 6.0, s)));
  CHECK_THROWS(confidence_value(1.0, 0, 10, 3, 6.0, s));
  CHECK_THROWS(confidence_value(1.0, 4, 0, 3, 6.0, s));
}

TEST_CASE("confidence shrinks with pulls and widens with time") {
  EpochSchedule s{50, 1, {}};
  for (double c : {0.0, 1.0}) {
    for (long k = 1; k < 60; ++k)
      CHECK(confidence_value(c, k + 1, 100, 4, 6.0, s) <
            confidence_value(c, k, 100, 4, 6.0, s));
    for (long t = 2; t < 60; ++t)
      CHECK(confidence_value(c, 10, t + 1, 4, 6.0, s) >
            confidence_value(c, 10, t, 4, 6.0, s));
  }
}

TEST_CASE("mixing constants are filled from the arm kernels") {
  World w = trap_world(0.1);
  PolicyConfig cfg = PolicyConfig::make(Variant::mg_eucb, w.env);
  REQUIRE(cfg.mixing_constants.size() == 4);
  for (int idx = 0; idx < 4; ++idx)
    CHECK(cfg.mixing_constants[idx] ==
          doctest::Approx(
              mixing_profile(w.env.arm({idx / 2, idx % 2}).kernel).c_mix));
}

TEST_CASE("fresh bandit state starts with one optimistic pull per edge") {
  World w = trap_world(0.1);
  BanditState st = init_state(w.instance);
  CHECK(st.cum_reward == std::vector<double>(4, 0.0));
  CHECK(st.pulls == std::vector<long>(4, 1));
  CHECK(st.epoch == 0);
  CHECK(!st.cover_done());
  // the initialization queue plays every edge exactly once
  std::multiset<int> covered;
  for (const Matching& m : st.cover_queue)
    for (Edge e : m.edges) covered.insert(w.instance.edge_index(e));
  CHECK(covered == std::multiset<int>({0, 1, 2, 3}));
}

TEST_CASE("selection serves the initialization queue before any index") {
  World w = trap_world(0.1);
  BanditState st = init_state(w.instance);
  PolicyConfig cfg = PolicyConfig::make(Variant::mg_eucb);
  EpochSchedule sched;
  for (std::size_t i = 0; i < st.cover_queue.size(); ++i) {
    Matching m = select(st, cfg, w.instance, sched);
    CHECK(m.same_edges(st.cover_queue[i]));
    EpochResult fake;
    for (Edge e : m.edges) fake.edge_means.emplace_back(e, 0.5);
    fake.iterations_used = sched.tau(static_cast<long>(i));
    update(st, m, fake, w.instance);
  }
  CHECK(st.cover_done());
}

TEST_CASE("after initialization the greedy matching on the index wins") {
  MatchingInstance shape = full_instance(1, 2, {0.0, 0.0});
  BanditState st = init_state(shape);
  st.cover_next = st.cover_queue.size();
  st.epoch = 10;
  st.pulls = {50, 50};
  st.cum_reward = {45.0, 5.0};  // empirical means 0.9 vs 0.1
  PolicyConfig cfg = PolicyConfig::make(Variant::mg_eucb);
  Matching m = select(st, cfg, shape, EpochSchedule{});
  CHECK(m.same_edges(Matching{{{0, 0}}}));

  // an untried edge's wide window beats a mediocre well-tried one
  st.pulls = {500, 1};
  st.cum_reward = {250.0, 0.0};
  m = select(st, cfg, shape, EpochSchedule{});
  CHECK(m.same_edges(Matching{{{0, 1}}}));
}

TEST_CASE("updates accumulate epoch averages and advance the clocks") {
  World w = trap_world(0.1);
  BanditState st = init_state(w.instance);
  Matching m{{{0, 0}, {1, 1}}};
  EpochResult res;
  res.edge_means = {{{0, 0}, 0.6}, {{1, 1}, 0.2}};
  res.iterations_used = 50;
  update(st, m, res, w.instance);
  CHECK(st.cum_reward[w.instance.edge_index({0, 0})] == doctest::Approx(0.6));
  CHECK(st.pulls[w.instance.edge_index({0, 0})] == 2);
  // the estimate divides by pulls including the optimistic initial one
  CHECK(st.cum_reward[0] / st.pulls[0] == doctest::Approx(0.3));
  CHECK(st.pulls[w.instance.edge_index({0, 1})] == 1);
  CHECK(st.epoch == 1);
  CHECK(st.clock == 50);

  EpochResult wrong;
  wrong.edge_means = {{{0, 1}, 0.5}};
  CHECK_THROWS(update(st, m, wrong, w.instance));
}

TEST_CASE("a zero-epoch run still plays the initialization cover") {
  World w = trap_world(0.1);
  EnvironmentModel env = w.env;
  Rng rng(3);
  RunTrace trace = run(env, w.instance, PolicyConfig::make(Variant::mg_eucb),
                       EpochSchedule{}, 0, rng);
  BanditState st = init_state(w.instance);
  REQUIRE(trace.epochs.size() == st.cover_queue.size());
  for (std::size_t i = 0; i < trace.epochs.size(); ++i)
    CHECK(trace.epochs[i].selections.front().first.same_edges(
        st.cover_queue[i]));
}

TEST_CASE("runs validate the environment against the instance shape") {
  World w = trap_world(0.1);
  EnvironmentModel env = w.env;
  MatchingInstance wrong = full_instance(3, 2, {0, 0, 0, 0, 0, 0});
  Rng rng(1);
  CHECK_THROWS(run(env, wrong, PolicyConfig::make(Variant::mg_eucb),
                   EpochSchedule{}, 1, rng));
}

TEST_CASE("recorded selection indices match the published formula") {
  World w = two_arm_world(0.9, 0.5);
  EnvironmentModel env = w.env;
  PolicyConfig cfg = PolicyConfig::make(Variant::mg_eucb, env);
  cfg.record_indices = true;
  EpochSchedule sched{10, 0, {}};
  Rng rng(4);
  RunTrace trace = run(env, w.instance, cfg, sched, 3, rng);
  // cover epochs carry no indices; later epochs carry one per edge
  CHECK(trace.epochs.front().indices.empty());
  const EpochRecord& rec = trace.epochs.back();
  REQUIRE(rec.indices.size() == 2);
  // verify numerically against a replayed reconstruction of the bandit state
  BanditState st = init_state(w.instance);
  EnvironmentModel env2 = w.env;
  Rng rng2(4);
  for (long k = 0; k + 1 < static_cast<long>(trace.epochs.size()); ++k) {
    Matching m = select(st, cfg, w.instance, sched);
    EpochResult r = play_epoch(env2, m, sched.tau(k), rng2);
    update(st, m, r, w.instance);
  }
  for (int i = 0; i < 2; ++i)
    CHECK(rec.indices[i] ==
          doctest::Approx(st.cum_reward[i] / st.pulls[i] +
                          confidence(w.instance.edge_at(i), st, cfg, sched,
                                     w.instance))
              .epsilon(1e-12));
}

TEST_CASE("suboptimal pulls grow sublinearly on a two-armed instance") {
  World w = two_arm_world(0.9, 0.5);
  EnvironmentModel env = w.env;
  Rng rng(11);
  EpochSchedule sched{10, 0, {}};
  RunTrace trace = run(env, w.instance, PolicyConfig::make(Variant::mg_eucb),
                       sched, 8000, rng);
  Benchmark bench = build_benchmark(w.env, w.instance);
  CHECK(bench.epoch_value == doctest::Approx(0.9));
  long sub_first = 0, sub_rest = 0;
  for (std::size_t k = 0; k < trace.epochs.size(); ++k) {
    const Matching& m = trace.epochs[k].selections.front().first;
    if (!bench.is_g_star(m)) (k < 2000 ? sub_first : sub_rest) += 1;
  }
  // logarithmic growth: the long tail adds fewer mistakes than the short head
  CHECK(sub_rest < sub_first);
  // and the tail is almost always optimal
  RegretTrace reg = regret_of(trace, bench);
  double tail = 0.0;
  for (std::size_t k = trace.epochs.size() - 2000; k < trace.epochs.size(); ++k)
    tail += reg.optimal_fraction[k];
  CHECK(tail / 2000 >= 0.9);
}

TEST_CASE("the epoch policy recovers the optimum of the benchmark world") {
  World w = trap_world(0.1);
  Benchmark bench = build_benchmark(w.env, w.instance);
  EpochSchedule sched{50, 1, EarlyStop{}};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EnvironmentModel env = w.env;
    Rng rng(seed);
    RunTrace trace = run(env, w.instance,
                         PolicyConfig::make(Variant::mg_eucb, env), sched,
                         1500, rng);
    RegretTrace reg = regret_of(trace, bench);
    double tail = 0.0;
    for (std::size_t k = trace.epochs.size() - 300; k < trace.epochs.size(); ++k)
      tail += reg.optimal_fraction[k];
    CHECK(tail / 300 >= 0.9);
  }
}

TEST_CASE("the per-iteration baseline reports full buckets") {
  World w = trap_world(0.1);
  EnvironmentModel env = w.env;
  Rng rng(5);
  EpochSchedule sched{5, 1, {}};
  RunTrace trace =
      run(env, w.instance, PolicyConfig::make(Variant::c_ucb), sched, 20, rng);
  REQUIRE(trace.epochs.size() == 20);
  long clock = 0;
  for (std::size_t k = 0; k < trace.epochs.size(); ++k) {
    const EpochRecord& rec = trace.epochs[k];
    CHECK(rec.iterations == sched.tau(static_cast<long>(k)));
    long counted = 0;
    for (const auto& [m, n] : rec.selections) counted += n;
    CHECK(counted == rec.iterations);
    CHECK(rec.clock_start == clock);
    clock += rec.iterations;
  }
  CHECK(env.clock() == clock);
}

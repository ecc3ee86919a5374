#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "geb/bikeshare.hpp"
#include "geb/rng.hpp"

using namespace geb;

namespace {

// a small planar world with one flow, fully deterministic behaviour
BikeshareWorld line_world(double threshold, double accept_p, long origin_supply,
                          double rate) {
  BikeshareWorld w;
  w.geographic = false;
  w.demand_mode = DemandMode::static_mean;
  w.behavior = BehaviorModel::utility;
  // stations on a line, 1000 m apart
  for (int s = 0; s < 4; ++s)
    w.stations.push_back({s, 1000.0 * s, 0.0, 20});
  w.stations[0].supply = origin_supply;
  w.flows.push_back({0, 2, rate});
  w.flow_kernels.push_back(TransitionKernel(1, {1.0}));
  w.behavior_params.push_back({{threshold}, {accept_p}});
  w.flow_states.push_back(0);
  w.k_candidates = 2;
  w.budget_fraction = 0.01;
  return w;
}

double mean_of(const std::vector<double>& v, std::size_t from) {
  double s = std::accumulate(v.begin() + static_cast<long>(from), v.end(), 0.0);
  return s / static_cast<double>(v.size() - from);
}

}  // namespace

TEST_CASE("trip ingestion aggregates in-window rates per ordered pair") {
  std::stringstream csv(
      "start_time,start_station_id,end_station_id,start_lat,start_lon,"
      "end_lat,end_lon\n"
      "2024-05-01T12:10:00,7,9,41.88,-87.63,41.89,-87.62\n"
      "2024-05-02T12:45:00,7,9,41.88,-87.63,41.89,-87.62\n"
      "2024-05-03 12:59:59,7,9,41.88,-87.63,41.89,-87.62\n"
      "2024-05-03T12:30:00,9,7,41.89,-87.62,41.88,-87.63\n"
      "2024-05-03T08:30:00,7,9,41.88,-87.63,41.89,-87.62\n"
      "2024-05-04T13:00:00,7,9,41.88,-87.63,41.89,-87.62\n");
  IngestResult r = ingest_trips(csv, 12, 13, 10, 2.0);
  CHECK(r.rows_used == 4);
  CHECK(r.rows_skipped == 2);  // 08:30 and 13:00 fall outside [12, 13)
  CHECK(r.days == 3);
  REQUIRE(r.stations.size() == 2);
  CHECK(r.stations[0].supply == 20);  // base 10 scaled by 2
  REQUIRE(r.flows.size() == 2);
  // three trips 7->9 over three distinct in-window days
  bool saw_forward = false;
  for (const FlowDemand& f : r.flows) {
    if (r.stations[f.origin].id == 7) {
      CHECK(f.mean_rate == doctest::Approx(1.0));
      saw_forward = true;
    } else {
      CHECK(f.mean_rate == doctest::Approx(1.0 / 3.0));
    }
  }
  CHECK(saw_forward);
}

TEST_CASE("trip ingestion reports the offending line of a malformed row") {
  std::stringstream csv(
      "start_time,start_station_id,end_station_id\n"
      "2024-05-01T12:10:00,7,9\n"
      "2024-05-01T12:10:00,not_a_number,9\n");
  try {
    ingest_trips(csv);
    FAIL("expected a parse failure");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("trip ingestion requires the mandatory columns") {
  std::stringstream csv("start_time,start_station_id\n");
  CHECK_THROWS(ingest_trips(csv));
  std::stringstream empty("");
  CHECK_THROWS(ingest_trips(empty));
}

TEST_CASE("static demand rounds half to even, poisson matches its mean") {
  BikeshareWorld w = line_world(4000, 1.0, 20, 2.4);
  w.flows.push_back({1, 3, 2.5});
  w.flows.push_back({2, 3, 3.5});
  w.flows.push_back({3, 0, 0.0});
  for (int i = 0; i < 3; ++i) {
    w.flow_kernels.push_back(TransitionKernel(1, {1.0}));
    w.behavior_params.push_back({{4000.0}, {1.0}});
    w.flow_states.push_back(0);
  }
  Rng rng(5);
  std::vector<long> d = sample_demand(w, rng);
  CHECK(d == std::vector<long>({2, 2, 4, 0}));

  w.demand_mode = DemandMode::poisson;
  double sum = 0.0;
  const int reps = 10000;
  for (int i = 0; i < reps; ++i) sum += sample_demand(w, rng)[2];
  const double se = std::sqrt(3.5 / reps);
  CHECK(std::abs(sum / reps - 3.5) <= 3 * se);
}

TEST_CASE("candidate stations are the nearest to the destination, excluding it") {
  BikeshareWorld w = line_world(4000, 1.0, 20, 5.0);
  // destination is station 2; stations 1 and 3 tie at 1000 m, index breaks it
  std::vector<int> c = w.candidate_stations(0);
  CHECK(c == std::vector<int>({1, 3}));
  w.k_candidates = 10;
  CHECK(w.candidate_stations(0) == std::vector<int>({1, 3, 0}));
}

TEST_CASE("the epoch instance rosters the highest-demand flows within budget") {
  BikeshareWorld w = line_world(4000, 1.0, 20, 90.0);
  w.flows.push_back({1, 3, 110.0});
  w.flows.push_back({3, 0, 100.0});
  for (int i = 0; i < 2; ++i) {
    w.flow_kernels.push_back(TransitionKernel(1, {1.0}));
    w.behavior_params.push_back({{4000.0}, {1.0}});
    w.flow_states.push_back(0);
  }
  std::vector<long> requests = {90, 110, 100};
  EpochInstance inst = build_epoch_instance(w, requests);  // budget = 3
  REQUIRE(!inst.empty());
  CHECK(inst.agent_flows == std::vector<int>({0, 1, 2}));

  w.budget_fraction = 0.005;  // budget = 1: only the top flow stays
  inst = build_epoch_instance(w, requests);
  REQUIRE(!inst.empty());
  CHECK(inst.agent_flows == std::vector<int>({1}));
  // incentives are exactly that flow's candidates
  CHECK(inst.incentive_stations.size() == 2);
  CHECK(inst.shape().agents() == 1);
  CHECK(inst.shape().incentives() == 2);

  // zero demand or a sub-one budget produce the empty instance
  CHECK(build_epoch_instance(w, {0, 0, 0}).empty());
  w.budget_fraction = 0.0;
  CHECK(build_epoch_instance(w, requests).empty());
}

TEST_CASE("non-candidate pairs sit in a zero-capacity class") {
  BikeshareWorld w = line_world(4000, 1.0, 20, 60.0);
  w.flows.push_back({1, 0, 60.0});  // destination 0: candidates {1, 2}
  w.flow_kernels.push_back(TransitionKernel(1, {1.0}));
  w.behavior_params.push_back({{4000.0}, {1.0}});
  w.flow_states.push_back(0);
  std::vector<long> requests = {60, 60};
  EpochInstance inst = build_epoch_instance(w, requests);  // budget = 1
  REQUIRE(!inst.empty());
  REQUIRE(inst.agent_flows.size() == 1);  // ties go to the lower flow index
  CHECK(inst.agent_flows[0] == 0);
  const MatchingInstance& shape = inst.shape();
  for (int idx = 0; idx < shape.num_edges(); ++idx) {
    Edge e = shape.edge_at(idx);
    int cap = shape.capacity(shape.class_of(e));
    CHECK(cap == 1);  // a single agent: every listed incentive is a candidate
  }
}

TEST_CASE("expected offer rewards follow the behaviour model") {
  BikeshareWorld w = line_world(3200, 0.5, 20, 5.0);
  // flow 0 ends at station 2; station 1 and 3 are 1000 m away, station 0 is
  // 2000 m away
  CHECK(expected_offer_reward(w, 0, 1, 0) ==
        doctest::Approx(0.5 * (3200.0 - 1000.0) / 4000.0));
  CHECK(expected_offer_reward(w, 0, 2, 0) ==
        doctest::Approx(0.5 * 3200.0 / 4000.0));  // zero distance
  w.behavior_params[0].threshold_m[0] = 900.0;
  CHECK(expected_offer_reward(w, 0, 1, 0) == doctest::Approx(0.0));
  w.behavior = BehaviorModel::bernoulli;
  w.behavior_params[0].threshold_m[0] = 3200.0;
  CHECK(expected_offer_reward(w, 0, 1, 0) == doctest::Approx(0.5));
}

TEST_CASE("routing serves while supply lasts and conserves bikes") {
  BikeshareWorld w = line_world(4000, 0.0, 6, 10.0);
  const long before = w.total_bikes();
  BikeshareEpochStats stats;
  Rng rng(3);
  EpochInstance inst;  // no incentives at all
  play_bikeshare_epoch(w, inst, Matching{}, {10}, 0, rng, stats);
  CHECK(stats.served == 6);
  CHECK(stats.rejected == 4);
  CHECK(stats.offered == 0);
  CHECK(stats.efficiency() == doctest::Approx(0.6));
  CHECK(w.total_bikes() == before);
  CHECK(w.stations[0].supply == 0);
  CHECK(w.stations[2].supply == 26);
}

TEST_CASE("an accepted offer redirects exactly the first trip of the flow") {
  BikeshareWorld w = line_world(4000, 1.0, 20, 3.0);  // always accepts
  std::vector<long> requests = {3};
  EpochInstance inst = build_epoch_instance(w, {300});
  REQUIRE(!inst.empty());
  // match the flow to its nearest candidate (station 1)
  int col = -1;
  for (int c = 0; c < static_cast<int>(inst.incentive_stations.size()); ++c)
    if (inst.incentive_stations[c] == 1) col = c;
  REQUIRE(col >= 0);
  BikeshareEpochStats stats;
  Rng rng(4);
  EpochResult res = play_bikeshare_epoch(w, inst, Matching{{{0, col}}},
                                         requests, 5, rng, stats);
  CHECK(stats.offered == 1);
  CHECK(stats.accepted == 1);
  CHECK(stats.served == 3);
  // one trip lands at station 1, the other two at the intended station 2
  CHECK(w.stations[0].supply == 17);
  CHECK(w.stations[1].supply == 21);
  CHECK(w.stations[2].supply == 22);
  // the per-iteration reward of a certain accept at 1000 m is (4000-1000)/4000
  REQUIRE(res.edge_means.size() == 1);
  CHECK(res.edge_means[0].second == doctest::Approx(0.75));
}

TEST_CASE("worlds round-trip through JSON") {
  BikeshareWorld w = synthetic_grid_world(7);
  BikeshareWorld back = BikeshareWorld::from_json_string(w.to_json_string());
  CHECK(back.to_json_string() == w.to_json_string());
  CHECK(back.stations.size() == w.stations.size());
  CHECK(back.flows.size() == w.flows.size());
}

TEST_CASE("the bundled benchmark world is shaped for a single incentive slot") {
  BikeshareWorld w = synthetic_grid_world(7);
  CHECK(w.stations.size() == 25);
  CHECK(w.flows.size() == 19);
  Rng rng(1);
  std::vector<long> requests = sample_demand(w, rng);
  CHECK(std::accumulate(requests.begin(), requests.end(), 0L) == 110);
  EpochInstance inst = build_epoch_instance(w, requests);
  REQUIRE(!inst.empty());
  CHECK(inst.agent_flows.size() == 1);  // floor(0.01 * 110) = 1
  // the roster slot belongs to the unique highest-rate flow, whose nearest
  // candidate is the starving hub
  const int feeder = inst.agent_flows[0];
  CHECK(w.flows[feeder].mean_rate == doctest::Approx(7.0));
  CHECK(w.candidate_stations(feeder).front() == 2 * 5 + 2);
  // another seed yields another world, same structure
  BikeshareWorld w2 = synthetic_grid_world(8);
  CHECK(w2.flows.size() == 19);
  CHECK(w2.to_json_string() != w.to_json_string());
}

TEST_CASE("incentives improve service in the bundled world") {
  BikeshareWorld w = synthetic_grid_world(3);
  EpochSchedule sched{10, 1, {}};
  const long n_epochs = 800;
  double learned = 0.0, full = 0.0, none = 0.0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    BikeshareComparison cmp = run_bikeshare(w, sched, n_epochs, seed);
    // bike conservation holds at every epoch boundary in every mode
    for (const BikeshareTrace* t :
         {&cmp.learned, &cmp.full_information, &cmp.no_incentive})
      for (long bikes : t->total_bikes) CHECK(bikes == w.total_bikes());
    // offers never exceed the budget of one per epoch
    for (long o : cmp.learned.offered) CHECK(o <= 1);
    const std::size_t burn = n_epochs / 4;
    learned += mean_of(cmp.learned.efficiency, burn);
    full += mean_of(cmp.full_information.efficiency, burn);
    none += mean_of(cmp.no_incentive.efficiency, burn);
  }
  CHECK(none < full);
  CHECK(learned > none - 1e-3);
  CHECK(full <= 3.0 + 1e-9);  // means of efficiencies stay in [0, 1] per seed
}

#include "geb/bikeshare.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace geb {

namespace {

constexpr double kThresholdCeiling = 4000.0;  // meters
constexpr double kEarthRadius = 6371000.0;    // meters

double haversine(double lon1, double lat1, double lon2, double lat2) {
  const double rad = std::acos(-1.0) / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(s)));
}

TransitionKernel random_kernel(int n_states, Rng& rng) {
  // strictly positive rows: irreducible and aperiodic by construction
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> rows(static_cast<std::size_t>(n_states) * n_states);
  for (int s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (int t = 0; t < n_states; ++t) {
      double v = u(rng);
      rows[static_cast<std::size_t>(s) * n_states + t] = v;
      total += v;
    }
    for (int t = 0; t < n_states; ++t)
      rows[static_cast<std::size_t>(s) * n_states + t] /= total;
  }
  return TransitionKernel(n_states, std::move(rows));
}

BehavioralParams random_behavior(int n_states, Rng& rng) {
  std::uniform_real_distribution<double> u_thr(0.0, kThresholdCeiling);
  std::uniform_real_distribution<double> u_p(0.0, 1.0);
  BehavioralParams b;
  b.threshold_m.reserve(n_states);
  b.accept_p.reserve(n_states);
  for (int s = 0; s < n_states; ++s) {
    b.threshold_m.push_back(u_thr(rng));
    b.accept_p.push_back(u_p(rng));
  }
  return b;
}

}  // namespace

const char* to_string(DemandMode mode) {
  return mode == DemandMode::static_mean ? "static" : "poisson";
}

const char* to_string(BehaviorModel model) {
  return model == BehaviorModel::bernoulli ? "bernoulli" : "utility";
}

const char* to_string(BikeshareMode mode) {
  switch (mode) {
    case BikeshareMode::learned: return "learned";
    case BikeshareMode::full_information: return "full_information";
    case BikeshareMode::no_incentive: return "no_incentive";
  }
  return "?";
}

DemandMode demand_mode_from_string(const std::string& name) {
  if (name == "static") return DemandMode::static_mean;
  if (name == "poisson") return DemandMode::poisson;
  throw std::invalid_argument("unknown demand mode: " + name);
}

BehaviorModel behavior_model_from_string(const std::string& name) {
  if (name == "bernoulli") return BehaviorModel::bernoulli;
  if (name == "utility") return BehaviorModel::utility;
  throw std::invalid_argument("unknown behavior model: " + name);
}

double BikeshareWorld::distance(int station_a, int station_b) const {
  const Station& a = stations[station_a];
  const Station& b = stations[station_b];
  if (geographic) return haversine(a.x, a.y, b.x, b.y);
  return std::hypot(a.x - b.x, a.y - b.y);
}

long BikeshareWorld::total_bikes() const {
  long total = 0;
  for (const Station& s : stations) total += s.supply;
  return total;
}

std::vector<int> BikeshareWorld::candidate_stations(int flow) const {
  const int dest = flows[flow].dest;
  std::vector<int> ids;
  ids.reserve(stations.size());
  for (int s = 0; s < static_cast<int>(stations.size()); ++s)
    if (s != dest) ids.push_back(s);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return distance(dest, a) < distance(dest, b);
  });
  if (static_cast<int>(ids.size()) > k_candidates) ids.resize(k_candidates);
  return ids;
}

IngestResult ingest_trips(std::istream& csv, int window_start_hour,
                          int window_end_hour, long base_supply,
                          double supply_scale) {
  IngestResult out;
  std::string line;
  if (!std::getline(csv, line))
    throw std::runtime_error("trips CSV: empty stream");

  // header -> column positions
  std::map<std::string, int> col;
  {
    std::stringstream header(line);
    std::string name;
    int idx = 0;
    while (std::getline(header, name, ',')) col[name] = idx++;
  }
  for (const char* required :
       {"start_station_id", "end_station_id", "start_time"})
    if (!col.count(required))
      throw std::runtime_error(std::string("trips CSV: missing column ") +
                               required);
  const bool has_coords = col.count("start_lat") && col.count("start_lon") &&
                          col.count("end_lat") && col.count("end_lon");

  std::map<int, Station> stations;
  std::map<std::pair<int, int>, long> pair_counts;
  std::set<std::string> days;
  long line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (static_cast<int>(fields.size()) <
        (has_coords ? static_cast<int>(col.size()) : 3))
      throw std::runtime_error("trips CSV line " + std::to_string(line_no) +
                               ": too few fields");
    try {
      const int origin = std::stoi(fields[col["start_station_id"]]);
      const int dest = std::stoi(fields[col["end_station_id"]]);
      const std::string& stamp = fields[col["start_time"]];
      // ISO-8601: YYYY-MM-DD[T ]HH:MM:SS
      if (stamp.size() < 13 || stamp[4] != '-' || stamp[7] != '-')
        throw std::invalid_argument("bad timestamp");
      const int hour = std::stoi(stamp.substr(11, 2));
      if (hour < window_start_hour || hour >= window_end_hour) {
        ++out.rows_skipped;
        continue;
      }
      days.insert(stamp.substr(0, 10));
      pair_counts[{origin, dest}] += 1;
      ++out.rows_used;
      auto touch = [&](int id, double lat, double lon) {
        auto [it, inserted] = stations.try_emplace(id);
        if (inserted) {
          it->second.id = id;
          it->second.x = lon;
          it->second.y = lat;
          it->second.supply = static_cast<long>(
              std::llround(static_cast<double>(base_supply) * supply_scale));
        }
      };
      if (has_coords) {
        touch(origin, std::stod(fields[col["start_lat"]]),
              std::stod(fields[col["start_lon"]]));
        touch(dest, std::stod(fields[col["end_lat"]]),
              std::stod(fields[col["end_lon"]]));
      } else {
        touch(origin, 0.0, 0.0);
        touch(dest, 0.0, 0.0);
      }
    } catch (const std::exception&) {
      throw std::runtime_error("trips CSV line " + std::to_string(line_no) +
                               ": malformed row");
    }
  }
  out.days = static_cast<long>(days.size());
  std::map<int, int> dense;  // raw id -> dense station index
  for (auto& [id, st] : stations) {
    dense[id] = static_cast<int>(out.stations.size());
    out.stations.push_back(st);
  }
  for (const auto& [pair, count] : pair_counts)
    out.flows.push_back({dense[pair.first], dense[pair.second],
                         static_cast<double>(count) /
                             static_cast<double>(std::max<long>(out.days, 1))});
  return out;
}

BikeshareWorld world_from_ingest(const IngestResult& ingest, DemandMode demand,
                                 BehaviorModel behavior, std::uint64_t seed,
                                 int n_states) {
  BikeshareWorld w;
  w.stations = ingest.stations;
  w.flows = ingest.flows;
  w.demand_mode = demand;
  w.behavior = behavior;
  w.geographic = true;
  Rng rng(derive_seed(seed, 0xb1c5));
  for (std::size_t f = 0; f < w.flows.size(); ++f) {
    w.flow_kernels.push_back(random_kernel(n_states, rng));
    w.behavior_params.push_back(random_behavior(n_states, rng));
    w.flow_states.push_back(0);
  }
  return w;
}

BikeshareWorld synthetic_grid_world(std::uint64_t seed) {
  BikeshareWorld w;
  w.geographic = false;
  w.demand_mode = DemandMode::static_mean;
  w.behavior = BehaviorModel::bernoulli;

  // 5x5 grid, 800 m spacing. Station (2,3) is pulled in to 300 m above the
  // hub so the hub is the strict nearest candidate of trips ending there.
  const double spacing = 800.0;
  const auto at = [](int i, int j) { return i * 5 + j; };
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      w.stations.push_back({at(i, j), i * spacing, j * spacing, 20});
  const int hub = at(2, 2);
  const int magnet = at(2, 3);  // the destination whose trips can feed the hub
  w.stations[magnet].x = 2 * spacing;
  w.stations[magnet].y = 2 * spacing + 300.0;

  // balanced perimeter circulation (16 stations, rate 6 each)
  std::vector<int> ring;
  for (int j = 0; j < 5; ++j) ring.push_back(at(0, j));
  for (int i = 1; i < 5; ++i) ring.push_back(at(i, 4));
  for (int j = 3; j >= 0; --j) ring.push_back(at(4, j));
  for (int i = 3; i >= 1; --i) ring.push_back(at(i, 0));
  for (std::size_t r = 0; r < ring.size(); ++r)
    w.flows.push_back({ring[r], ring[(r + 1) % ring.size()], 6.0});

  const int corner = at(0, 0);
  // The feeder is the unique highest-rate flow, so it always holds the single
  // matching budget slot. Redirecting one of its trips to the hub is the only
  // way to keep the hub's outflow served.
  w.flows.push_back({corner, magnet, 7.0});  // feeder
  w.flows.push_back({magnet, corner, 6.0});  // return circulation
  w.flows.push_back({hub, corner, 1.0});     // the hub's draining outflow
  const int feeder = static_cast<int>(w.flows.size()) - 3;

  // The corner runs a structural one-bike-per-epoch deficit whenever the hub
  // cannot serve its outflow; a deep reservoir keeps that deficit from
  // cascading around the ring, so rejections isolate to the hub flow.
  w.stations[corner].supply = 100000;

  const int n_states = 5;
  Rng rng(derive_seed(seed, 0x6d1d));
  for (std::size_t f = 0; f < w.flows.size(); ++f) {
    w.flow_kernels.push_back(random_kernel(n_states, rng));
    w.behavior_params.push_back(random_behavior(n_states, rng));
    w.flow_states.push_back(0);
  }

  // Feeder riders accept only detours shorter than their threshold. The hub
  // sits 300 m from the magnet and every other candidate at least 854 m away,
  // so thresholds between those radii make the hub the sole acceptable
  // redirect in every latent state: exploring the other candidates is cheap
  // (offers are declined, nothing is stranded) while the hub arm pays its
  // acceptance probability, giving a wide, learnable reward gap.
  std::uniform_real_distribution<double> u_thr(450.0, 800.0);
  std::uniform_real_distribution<double> u_acc(0.85, 0.95);
  BehavioralParams& fb = w.behavior_params[feeder];
  for (int s = 0; s < n_states; ++s) {
    fb.threshold_m[s] = u_thr(rng);
    fb.accept_p[s] = u_acc(rng);
  }
  return w;
}

std::vector<long> sample_demand(const BikeshareWorld& world, Rng& rng) {
  std::vector<long> requests(world.flows.size(), 0);
  for (std::size_t f = 0; f < world.flows.size(); ++f) {
    const double rate = world.flows[f].mean_rate;
    if (rate <= 0.0) continue;
    if (world.demand_mode == DemandMode::static_mean) {
      requests[f] = static_cast<long>(std::nearbyint(rate));
    } else {
      std::poisson_distribution<long> pois(rate);
      requests[f] = pois(rng);
    }
  }
  return requests;
}

EpochInstance build_epoch_instance(const BikeshareWorld& world,
                                   const std::vector<long>& requests) {
  EpochInstance out;
  long total = std::accumulate(requests.begin(), requests.end(), 0L);
  const long budget = static_cast<long>(
      std::floor(world.budget_fraction * static_cast<double>(total)));
  if (budget <= 0 || world.k_candidates <= 0) return out;

  std::vector<int> active;
  for (int f = 0; f < static_cast<int>(requests.size()); ++f)
    if (requests[f] > 0) active.push_back(f);
  // roster = highest-demand flows first (ties by flow index), capped at budget
  std::stable_sort(active.begin(), active.end(),
                   [&](int a, int b) { return requests[a] > requests[b]; });
  if (static_cast<long>(active.size()) > budget)
    active.resize(static_cast<std::size_t>(budget));
  if (active.empty()) return out;
  std::sort(active.begin(), active.end());
  out.agent_flows = active;

  std::set<int> station_set;
  std::vector<std::vector<int>> cands(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    cands[a] = world.candidate_stations(active[a]);
    station_set.insert(cands[a].begin(), cands[a].end());
  }
  out.incentive_stations.assign(station_set.begin(), station_set.end());
  std::map<int, int> station_col;
  for (int c = 0; c < static_cast<int>(out.incentive_stations.size()); ++c)
    station_col[out.incentive_stations[c]] = c;

  const int n_agents = static_cast<int>(active.size());
  const int n_inc = static_cast<int>(out.incentive_stations.size());
  // class per candidate station (capacity 1) plus a zero-weight filler class
  // for agent-candidate pairs outside each flow's own candidate list
  std::vector<int> class_of(static_cast<std::size_t>(n_agents) * n_inc,
                            n_inc);
  std::vector<double> weights(static_cast<std::size_t>(n_agents) * n_inc, 0.0);
  for (int a = 0; a < n_agents; ++a)
    for (int s : cands[a])
      class_of[static_cast<std::size_t>(a) * n_inc + station_col[s]] =
          station_col[s];
  std::vector<int> capacities(n_inc, 1);
  capacities.push_back(0);  // non-candidate pairs are never matchable
  out.shape_storage.emplace_back(n_agents, n_inc, std::move(class_of),
                                 std::move(capacities), std::move(weights));
  return out;
}

double BikeshareEpochStats::efficiency() const {
  const long total = served + rejected;
  return total > 0 ? static_cast<double>(served) / static_cast<double>(total)
                   : 1.0;
}

double expected_offer_reward(const BikeshareWorld& world, int flow, int station,
                             int state) {
  const BehavioralParams& b = world.behavior_params[flow];
  const double dist = world.distance(world.flows[flow].dest, station);
  if (dist > b.threshold_m[state]) return 0.0;
  if (world.behavior == BehaviorModel::bernoulli) return b.accept_p[state];
  return b.accept_p[state] *
         std::max(0.0, b.threshold_m[state] - dist) / kThresholdCeiling;
}

namespace {

// One offer resolution at the flow's current state: acceptance flag + reward.
std::pair<bool, double> resolve_offer(const BikeshareWorld& world, int flow,
                                      int station, Rng& rng) {
  const BehavioralParams& b = world.behavior_params[flow];
  const int state = world.flow_states[flow];
  const double dist = world.distance(world.flows[flow].dest, station);
  if (dist > b.threshold_m[state]) return {false, 0.0};
  if (uniform01(rng) >= b.accept_p[state]) return {false, 0.0};
  const double reward =
      world.behavior == BehaviorModel::bernoulli
          ? 1.0
          : std::max(0.0, b.threshold_m[state] - dist) / kThresholdCeiling;
  return {true, reward};
}

}  // namespace

EpochResult play_bikeshare_epoch(BikeshareWorld& world,
                                 const EpochInstance& instance,
                                 const Matching& matching,
                                 const std::vector<long>& requests, long tau,
                                 Rng& rng, BikeshareEpochStats& stats) {
  EpochResult result;
  result.iterations_used = tau;

  // (flow, candidate station) per matched edge
  std::vector<std::pair<int, int>> arms;
  for (Edge e : matching.edges)
    arms.emplace_back(instance.agent_flows[e.agent],
                      instance.incentive_stations[e.incentive]);

  std::vector<double> reward_sum(arms.size(), 0.0);
  for (long t = 0; t < tau; ++t) {
    for (std::size_t a = 0; a < arms.size(); ++a) {
      auto [flow, station] = arms[a];
      reward_sum[a] += resolve_offer(world, flow, station, rng).second;
      world.flow_states[flow] =
          step(world.flow_kernels[flow], world.flow_states[flow], rng);
    }
  }
  for (std::size_t a = 0; a < arms.size(); ++a)
    result.edge_means.emplace_back(matching.edges[a],
                                   reward_sum[a] / static_cast<double>(tau));

  // route the epoch's demand once; at most one accepted redirect per arm
  std::vector<int> redirect_to(world.flows.size(), -1);
  for (auto [flow, station] : arms) {
    stats.offered += 1;
    if (resolve_offer(world, flow, station, rng).first) {
      stats.accepted += 1;
      redirect_to[flow] = station;
    }
  }
  for (std::size_t f = 0; f < world.flows.size(); ++f) {
    for (long r = 0; r < requests[f]; ++r) {
      const int origin = world.flows[f].origin;
      // the redirected trip, if any, is the flow's first request
      const int dest = (r == 0 && redirect_to[f] >= 0) ? redirect_to[f]
                                                       : world.flows[f].dest;
      if (world.stations[origin].supply > 0) {
        world.stations[origin].supply -= 1;
        world.stations[dest].supply += 1;
        stats.served += 1;
      } else {
        stats.rejected += 1;
      }
    }
  }
  return result;
}

BikeshareTrace run_bikeshare_mode(BikeshareWorld world, BikeshareMode mode,
                                  const EpochSchedule& schedule, long n_epochs,
                                  Rng rng, double log_coefficient) {
  BikeshareTrace trace;
  struct ArmStat {
    double cum_reward = 0.0;
    long pulls = 1;
    double c_mix = 0.0;
  };
  std::map<std::pair<int, int>, ArmStat> arm_stats;
  std::vector<double> kernel_cmix(world.flows.size(), -1.0);
  const auto c_mix_of = [&](int flow) {
    if (kernel_cmix[flow] < 0.0)
      kernel_cmix[flow] = mixing_profile(world.flow_kernels[flow]).c_mix;
    return kernel_cmix[flow];
  };

  for (long k = 0; k < n_epochs; ++k) {
    std::vector<long> requests = sample_demand(world, rng);
    EpochInstance inst = build_epoch_instance(world, requests);
    Matching chosen;
    if (mode != BikeshareMode::no_incentive && !inst.empty()) {
      const MatchingInstance& shape = inst.shape();
      std::vector<double> weights(shape.num_edges(), 0.0);
      const int m = std::max(shape.agents(), shape.incentives());
      for (int idx = 0; idx < shape.num_edges(); ++idx) {
        Edge e = shape.edge_at(idx);
        if (shape.capacity(shape.class_of(e)) == 0) continue;
        const int flow = inst.agent_flows[e.agent];
        const int station = inst.incentive_stations[e.incentive];
        if (mode == BikeshareMode::full_information) {
          weights[idx] = expected_offer_reward(world, flow, station,
                                               world.flow_states[flow]);
        } else {
          auto [it, inserted] = arm_stats.try_emplace({flow, station});
          if (inserted) it->second.c_mix = c_mix_of(flow);
          const ArmStat& s = it->second;
          weights[idx] =
              s.cum_reward / static_cast<double>(s.pulls) +
              confidence_value(s.c_mix, s.pulls, k + 1, m, log_coefficient,
                               schedule);
        }
      }
      chosen = greedy_match(shape.with_weights(std::move(weights)));
    }

    BikeshareEpochStats stats;
    // an empty instance still routes its demand; no offers resolve then
    EpochResult result = play_bikeshare_epoch(
        world, inst, chosen, requests,
        chosen.edges.empty() ? 0 : schedule.tau(k), rng, stats);
    if (mode == BikeshareMode::learned) {
      for (const auto& [edge, mean] : result.edge_means) {
        const int flow = inst.agent_flows[edge.agent];
        const int station = inst.incentive_stations[edge.incentive];
        ArmStat& s = arm_stats[{flow, station}];
        s.cum_reward += mean;
        s.pulls += 1;
      }
    }
    double realized = 0.0;
    for (const auto& [edge, mean] : result.edge_means) realized += mean;
    trace.efficiency.push_back(stats.efficiency());
    trace.mean_reward.push_back(realized);
    trace.served.push_back(stats.served);
    trace.rejected.push_back(stats.rejected);
    trace.offered.push_back(stats.offered);
    trace.accepted.push_back(stats.accepted);
    trace.total_bikes.push_back(world.total_bikes());
  }
  return trace;
}

BikeshareComparison run_bikeshare(const BikeshareWorld& world,
                                  const EpochSchedule& schedule, long n_epochs,
                                  std::uint64_t master_seed) {
  BikeshareComparison out;
  const BikeshareMode modes[] = {BikeshareMode::learned,
                                 BikeshareMode::full_information,
                                 BikeshareMode::no_incentive};
  BikeshareTrace* targets[] = {&out.learned, &out.full_information,
                               &out.no_incentive};
#pragma omp parallel for schedule(dynamic) if (n_epochs > 100)
  for (int i = 0; i < 3; ++i) {
    Rng rng(derive_seed(master_seed, 100 + static_cast<std::uint64_t>(i)));
    *targets[i] = run_bikeshare_mode(world, modes[i], schedule, n_epochs,
                                     std::move(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON snapshot

std::string BikeshareWorld::to_json_string() const {
  nlohmann::json j;
  for (const Station& s : stations)
    j["stations"].push_back({{"id", s.id}, {"x", s.x}, {"y", s.y},
                             {"supply", s.supply}});
  for (const FlowDemand& f : flows)
    j["flows"].push_back({{"origin", f.origin}, {"dest", f.dest},
                          {"mean_rate", f.mean_rate}});
  for (const TransitionKernel& k : flow_kernels)
    j["flow_kernels"].push_back(nlohmann::json::parse(k.to_json_string()));
  for (const BehavioralParams& b : behavior_params)
    j["behavior_params"].push_back(
        {{"threshold_m", b.threshold_m}, {"accept_p", b.accept_p}});
  j["flow_states"] = flow_states;
  j["demand_mode"] = to_string(demand_mode);
  j["behavior"] = to_string(behavior);
  j["geographic"] = geographic;
  j["k_candidates"] = k_candidates;
  j["budget_fraction"] = budget_fraction;
  return j.dump();
}

BikeshareWorld BikeshareWorld::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  BikeshareWorld w;
  for (const auto& s : j.at("stations"))
    w.stations.push_back({s.at("id").get<int>(), s.at("x").get<double>(),
                          s.at("y").get<double>(), s.at("supply").get<long>()});
  for (const auto& f : j.at("flows"))
    w.flows.push_back({f.at("origin").get<int>(), f.at("dest").get<int>(),
                       f.at("mean_rate").get<double>()});
  for (const auto& k : j.at("flow_kernels"))
    w.flow_kernels.push_back(TransitionKernel::from_json_string(k.dump()));
  for (const auto& b : j.at("behavior_params"))
    w.behavior_params.push_back(
        {b.at("threshold_m").get<std::vector<double>>(),
         b.at("accept_p").get<std::vector<double>>()});
  w.flow_states = j.at("flow_states").get<std::vector<int>>();
  w.demand_mode = demand_mode_from_string(j.at("demand_mode").get<std::string>());
  w.behavior = behavior_model_from_string(j.at("behavior").get<std::string>());
  w.geographic = j.at("geographic").get<bool>();
  w.k_candidates = j.at("k_candidates").get<int>();
  w.budget_fraction = j.at("budget_fraction").get<double>();
  if (w.flow_kernels.size() != w.flows.size() ||
      w.behavior_params.size() != w.flows.size() ||
      w.flow_states.size() != w.flows.size())
    throw std::invalid_argument("world JSON: per-flow arrays disagree");
  return w;
}

}  // namespace geb

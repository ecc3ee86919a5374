#include "geb/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "geb/regret.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geb {

namespace fs = std::filesystem;

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::trap: return "trap";
    case ExperimentKind::synthetic: return "synthetic";
    case ExperimentKind::bikeshare: return "bikeshare";
    case ExperimentKind::matching_audit: return "matching-audit";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "trap") return ExperimentKind::trap;
  if (name == "synthetic") return ExperimentKind::synthetic;
  if (name == "bikeshare") return ExperimentKind::bikeshare;
  if (name == "matching-audit") return ExperimentKind::matching_audit;
  throw std::invalid_argument("unknown experiment: " + name);
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    quoted += c;
    if (c == '"') quoted += '"';
  }
  quoted += '"';
  return quoted;
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// config

RunConfig validate_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") +
                                e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");

  static const std::vector<std::string> allowed = {
      "experiment",     "variants",       "tau0",
      "zeta",           "early_stop",     "n_epochs",
      "seeds",          "output_dir",     "workers",
      "log_coefficient", "debug_indices", "epsilon",
      "m",              "n_states",       "reward_family",
      "instance_seed",  "binding_capacities", "n_instances",
      "trips_csv",      "demand_mode",    "behavior",
      "k_candidates",   "budget_fraction"};
  std::string unknown;
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty())
    throw std::invalid_argument("config: unknown keys: " + unknown);

  RunConfig c;
  if (j.contains("experiment"))
    c.experiment =
        experiment_kind_from_string(j["experiment"].get<std::string>());
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j["variants"])
      c.variants.push_back(variant_from_string(v.get<std::string>()));
  }
  if (c.variants.empty())
    throw std::invalid_argument("config: variants must be non-empty");
  if (j.contains("tau0")) c.schedule.tau0 = j["tau0"].get<long>();
  if (j.contains("zeta")) c.schedule.zeta = j["zeta"].get<long>();
  if (c.schedule.tau0 < 1)
    throw std::invalid_argument("config: tau0 must be >= 1");
  if (c.schedule.zeta < 0)
    throw std::invalid_argument("config: zeta must be >= 0");
  if (j.contains("early_stop") && !j["early_stop"].is_null()) {
    const auto& es = j["early_stop"];
    for (const auto& [key, value] : es.items())
      if (key != "delta" && key != "patience")
        throw std::invalid_argument("config: unknown early_stop key: " + key);
    EarlyStop stop;
    if (es.contains("delta")) stop.delta = es["delta"].get<double>();
    if (es.contains("patience")) stop.patience = es["patience"].get<int>();
    if (stop.delta <= 0 || stop.patience < 1)
      throw std::invalid_argument(
          "config: early_stop requires delta > 0 and patience >= 1");
    c.schedule.early_stop = stop;
  }
  if (j.contains("n_epochs")) c.n_epochs = j["n_epochs"].get<long>();
  if (c.n_epochs < 0)
    throw std::invalid_argument("config: n_epochs must be >= 0");
  if (j.contains("seeds"))
    c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (c.seeds.empty())
    throw std::invalid_argument("config: seeds must be non-empty");
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("workers")) c.workers = j["workers"].get<int>();
  if (c.workers < 0) throw std::invalid_argument("config: workers must be >= 0");
  if (j.contains("log_coefficient")) {
    c.log_coefficient = j["log_coefficient"].get<double>();
    if (*c.log_coefficient <= 0)
      throw std::invalid_argument("config: log_coefficient must be > 0");
  }
  if (j.contains("debug_indices"))
    c.debug_indices = j["debug_indices"].get<bool>();
  if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
  if (c.epsilon <= 0 || c.epsilon >= 1)
    throw std::invalid_argument("config: epsilon must lie in (0, 1)");
  if (j.contains("m")) c.m = j["m"].get<int>();
  if (c.m < 1) throw std::invalid_argument("config: m must be >= 1");
  if (j.contains("n_states")) c.n_states = j["n_states"].get<int>();
  if (c.n_states < 1)
    throw std::invalid_argument("config: n_states must be >= 1");
  if (j.contains("reward_family"))
    c.reward_family =
        reward_family_from_string(j["reward_family"].get<std::string>());
  if (j.contains("instance_seed"))
    c.instance_seed = j["instance_seed"].get<std::uint64_t>();
  if (j.contains("binding_capacities"))
    c.binding_capacities = j["binding_capacities"].get<bool>();
  if (j.contains("n_instances")) c.n_instances = j["n_instances"].get<long>();
  if (c.n_instances < 1)
    throw std::invalid_argument("config: n_instances must be >= 1");
  if (j.contains("trips_csv")) c.trips_csv = j["trips_csv"].get<std::string>();
  if (!c.trips_csv.empty() && !fs::exists(c.trips_csv))
    throw std::invalid_argument("config: trips_csv path does not exist: " +
                                c.trips_csv);
  if (j.contains("demand_mode"))
    c.demand_mode = demand_mode_from_string(j["demand_mode"].get<std::string>());
  if (j.contains("behavior"))
    c.behavior = behavior_model_from_string(j["behavior"].get<std::string>());
  if (j.contains("k_candidates")) c.k_candidates = j["k_candidates"].get<int>();
  if (c.k_candidates < 0)
    throw std::invalid_argument("config: k_candidates must be >= 0");
  if (j.contains("budget_fraction"))
    c.budget_fraction = j["budget_fraction"].get<double>();
  if (c.budget_fraction < 0 || c.budget_fraction > 1)
    throw std::invalid_argument("config: budget_fraction must lie in [0, 1]");

  if (c.binding_capacities)
    for (Variant v : c.variants)
      if (v == Variant::h_eucb || v == Variant::h_eucb_plus)
        throw std::invalid_argument(
            "config: Hungarian variants require non-binding capacities");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read " + path);
  std::stringstream text;
  text << in.rdbuf();
  return validate_config(text.str());
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["experiment"] = to_string(c.experiment);
  for (Variant v : c.variants) j["variants"].push_back(to_string(v));
  j["tau0"] = c.schedule.tau0;
  j["zeta"] = c.schedule.zeta;
  if (c.schedule.early_stop)
    j["early_stop"] = {{"delta", c.schedule.early_stop->delta},
                       {"patience", c.schedule.early_stop->patience}};
  j["n_epochs"] = c.n_epochs;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  if (c.log_coefficient) j["log_coefficient"] = *c.log_coefficient;
  j["debug_indices"] = c.debug_indices;
  j["epsilon"] = c.epsilon;
  j["m"] = c.m;
  j["n_states"] = c.n_states;
  j["reward_family"] = to_string(c.reward_family);
  j["instance_seed"] = c.instance_seed;
  j["binding_capacities"] = c.binding_capacities;
  j["n_instances"] = c.n_instances;
  j["trips_csv"] = c.trips_csv;
  j["demand_mode"] = to_string(c.demand_mode);
  j["behavior"] = to_string(c.behavior);
  j["k_candidates"] = c.k_candidates;
  j["budget_fraction"] = c.budget_fraction;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// helpers

namespace {

int worker_count(const RunConfig& config) {
#ifdef _OPENMP
  return config.workers > 0 ? config.workers : omp_get_max_threads();
#else
  (void)config;
  return 1;
#endif
}

std::string matching_to_string(const Matching& m) {
  std::string out;
  for (std::size_t i = 0; i < m.edges.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(m.edges[i].agent) + ':' +
           std::to_string(m.edges[i].incentive);
  }
  return out;
}

void write_file(const std::string& path, const std::string& body,
                std::vector<std::string>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
  written.push_back(path);
}

struct SeriesSummary {
  std::vector<double> mean, se;
};

SeriesSummary summarize(const std::vector<std::vector<double>>& per_seed) {
  SeriesSummary s;
  if (per_seed.empty()) return s;
  std::size_t len = per_seed.front().size();
  for (const auto& v : per_seed) len = std::min(len, v.size());
  const double n = static_cast<double>(per_seed.size());
  for (std::size_t t = 0; t < len; ++t) {
    double mean = 0.0;
    for (const auto& v : per_seed) mean += v[t];
    mean /= n;
    double var = 0.0;
    for (const auto& v : per_seed) var += (v[t] - mean) * (v[t] - mean);
    var = per_seed.size() > 1 ? var / (n - 1.0) : 0.0;
    s.mean.push_back(mean);
    s.se.push_back(std::sqrt(var / n));
  }
  return s;
}

// The Hungarian variants chase the assignment optimum, so their optimal-
// matching frequency is reported against that target instead of the greedy
// benchmark.
Benchmark benchmark_for(Variant variant, const Benchmark& greedy_bench,
                        const MatchingInstance& shape) {
  if (variant != Variant::h_eucb && variant != Variant::h_eucb_plus)
    return greedy_bench;
  Benchmark b = greedy_bench;
  MatchingInstance weighted = shape.with_weights(b.mu);
  b.g_star = hungarian_match(weighted).edges;
  b.i_star.assign(shape.agents(), -1);
  b.epoch_value = 0.0;
  for (Edge e : b.g_star) {
    b.i_star[e.agent] = e.incentive;
    b.epoch_value += b.mu[shape.edge_index(e)];
  }
  return b;
}

struct BanditRunOutput {
  std::string trace_csv;
  std::vector<double> cumulative;
  std::vector<double> optimal_fraction;
};

BanditRunOutput one_bandit_run(const RunConfig& config, const World& world,
                               const Benchmark& bench, Variant variant,
                               std::uint64_t seed) {
  EnvironmentModel env = world.env;  // fresh copy per run
  PolicyConfig policy = PolicyConfig::make(variant, env);
  if (config.log_coefficient) policy.log_coefficient = *config.log_coefficient;
  policy.record_indices = config.debug_indices;
  Rng rng(derive_seed(seed, 0xa001 + static_cast<std::uint64_t>(variant)));
  RunTrace trace =
      run(env, world.instance, policy, config.schedule, config.n_epochs, rng);
  RegretTrace reg = regret_of(trace, bench);

  std::string body =
      "epoch,clock,matching,realized,benchmark,cumulative_regret,"
      "optimal_fraction";
  if (config.debug_indices) body += ",indices";
  body += '\n';
  for (std::size_t k = 0; k < trace.epochs.size(); ++k) {
    const EpochRecord& rec = trace.epochs[k];
    body += std::to_string(rec.epoch);
    body += ',' + std::to_string(rec.clock_start);
    body += ',' + csv_field(matching_to_string(rec.selections.front().first));
    body += ',' + format_number(rec.realized);
    body += ',' + format_number(reg.benchmark[k]);
    body += ',' + format_number(reg.cumulative[k]);
    body += ',' + format_number(reg.optimal_fraction[k]);
    if (config.debug_indices) {
      std::string idx;
      for (std::size_t i = 0; i < rec.indices.size(); ++i) {
        if (i) idx += ';';
        idx += format_number(rec.indices[i]);
      }
      body += ',' + csv_field(idx);
    }
    body += '\n';
  }
  return {std::move(body), std::move(reg.cumulative),
          std::move(reg.optimal_fraction)};
}

std::vector<std::string> run_bandit_experiment(const RunConfig& config) {
  const World world = config.experiment == ExperimentKind::trap
                          ? trap_world(config.epsilon)
                          : generate_synthetic(config.m, config.n_states,
                                               config.reward_family,
                                               config.instance_seed);
  const Benchmark greedy_bench = build_benchmark(world.env, world.instance);

  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : config.variants)
    for (std::uint64_t s : config.seeds) jobs.push_back({v, s});
  std::vector<BanditRunOutput> outputs(jobs.size());
  std::vector<Benchmark> benches;
  for (Variant v : config.variants)
    benches.push_back(benchmark_for(v, greedy_bench, world.instance));

  const int nthreads = worker_count(config);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::size_t vi = i / config.seeds.size();
    outputs[i] =
        one_bandit_run(config, world, benches[vi], jobs[i].variant,
                       jobs[i].seed);
  }

  std::vector<std::string> written;
  write_file(config.output_dir + "/instance.json",
             world.instance.to_json_string(), written);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string path = config.output_dir + "/trace_" +
                             to_string(jobs[i].variant) + "_seed" +
                             std::to_string(jobs[i].seed) + ".csv";
    write_file(path, outputs[i].trace_csv, written);
  }
  for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
    std::vector<std::vector<double>> regret, optfrac;
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      regret.push_back(outputs[vi * config.seeds.size() + si].cumulative);
      optfrac.push_back(
          outputs[vi * config.seeds.size() + si].optimal_fraction);
    }
    SeriesSummary r = summarize(regret);
    SeriesSummary f = summarize(optfrac);
    std::string body =
        "epoch,mean_cumulative_regret,se_cumulative_regret,"
        "mean_optimal_fraction,se_optimal_fraction\n";
    for (std::size_t t = 0; t < r.mean.size(); ++t)
      body += std::to_string(t) + ',' + format_number(r.mean[t]) + ',' +
              format_number(r.se[t]) + ',' + format_number(f.mean[t]) + ',' +
              format_number(f.se[t]) + '\n';
    write_file(config.output_dir + "/summary_" +
                   to_string(config.variants[vi]) + ".csv",
               body, written);
  }
  return written;
}

std::vector<std::string> run_bikeshare_experiment(const RunConfig& config) {
  BikeshareWorld world;
  if (config.trips_csv.empty()) {
    // The bundled benchmark world is self-describing; the demand/behaviour
    // knobs only shape worlds built from ingested trips.
    world = synthetic_grid_world(config.instance_seed);
  } else {
    std::ifstream in(config.trips_csv);
    if (!in) throw std::runtime_error("cannot read " + config.trips_csv);
    world = world_from_ingest(ingest_trips(in), config.demand_mode,
                              config.behavior, config.instance_seed);
    world.k_candidates = config.k_candidates;
    world.budget_fraction = config.budget_fraction;
  }

  std::vector<BikeshareComparison> results(config.seeds.size());
  const int nthreads = worker_count(config);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (std::size_t si = 0; si < config.seeds.size(); ++si)
    results[si] =
        run_bikeshare(world, config.schedule, config.n_epochs, config.seeds[si]);

  std::vector<std::string> written;
  write_file(config.output_dir + "/world.json", world.to_json_string(),
             written);
  const char* mode_names[] = {"learned", "full_information", "no_incentive"};
  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    std::string body =
        "epoch,mode,served,rejected,efficiency,incentives_offered,"
        "incentives_accepted,mean_matching_reward\n";
    const BikeshareTrace* traces[] = {&results[si].learned,
                                      &results[si].full_information,
                                      &results[si].no_incentive};
    for (int mi = 0; mi < 3; ++mi) {
      const BikeshareTrace& t = *traces[mi];
      for (std::size_t k = 0; k < t.efficiency.size(); ++k)
        body += std::to_string(k) + ',' + mode_names[mi] + ',' +
                std::to_string(t.served[k]) + ',' +
                std::to_string(t.rejected[k]) + ',' +
                format_number(t.efficiency[k]) + ',' +
                std::to_string(t.offered[k]) + ',' +
                std::to_string(t.accepted[k]) + ',' +
                format_number(t.mean_reward[k]) + '\n';
    }
    write_file(config.output_dir + "/bikeshare_seed" +
                   std::to_string(config.seeds[si]) + ".csv",
               body, written);
  }
  std::string body = "epoch,mode,mean_efficiency,se_efficiency\n";
  for (int mi = 0; mi < 3; ++mi) {
    std::vector<std::vector<double>> eff;
    for (const auto& r : results)
      eff.push_back(mi == 0   ? r.learned.efficiency
                    : mi == 1 ? r.full_information.efficiency
                              : r.no_incentive.efficiency);
    SeriesSummary s = summarize(eff);
    for (std::size_t t = 0; t < s.mean.size(); ++t)
      body += std::to_string(t) + ',' + mode_names[mi] + ',' +
              format_number(s.mean[t]) + ',' + format_number(s.se[t]) + '\n';
  }
  write_file(config.output_dir + "/summary_bikeshare.csv", body, written);
  return written;
}

std::vector<std::string> run_matching_audit(const RunConfig& config) {
  struct Row {
    int edges;
    double greedy_w, exact_w, ratio;
  };
  std::vector<Row> rows(config.n_instances);
  const int nthreads = worker_count(config);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (long i = 0; i < config.n_instances; ++i) {
    Rng rng(derive_seed(config.instance_seed,
                        static_cast<std::uint64_t>(i) + 0x4001));
    MatchingInstance inst = random_instance(rng, 4, 5);
    const double g = greedy_match(inst).total_weight(inst);
    const double x = exact_match(inst).total_weight(inst);
    rows[i] = {inst.num_edges(), g, x, x > 0.0 ? g / x : 1.0};
  }
  std::string body = "instance,edges,greedy_weight,exact_weight,ratio\n";
  double min_ratio = 1.0, mean_ratio = 0.0;
  long violations = 0;
  for (long i = 0; i < config.n_instances; ++i) {
    const Row& r = rows[i];
    body += std::to_string(i) + ',' + std::to_string(r.edges) + ',' +
            format_number(r.greedy_w) + ',' + format_number(r.exact_w) + ',' +
            format_number(r.ratio) + '\n';
    min_ratio = std::min(min_ratio, r.ratio);
    mean_ratio += r.ratio;
    if (r.ratio < 1.0 / 3.0 - 1e-12) ++violations;
  }
  mean_ratio /= static_cast<double>(config.n_instances);
  std::vector<std::string> written;
  write_file(config.output_dir + "/audit.csv", body, written);
  std::string summary = "min_ratio,mean_ratio,violations,instances\n";
  summary += format_number(min_ratio) + ',' + format_number(mean_ratio) + ',' +
             std::to_string(violations) + ',' +
             std::to_string(config.n_instances) + '\n';
  write_file(config.output_dir + "/audit_summary.csv", summary, written);
  return written;
}

}  // namespace

MatchingInstance random_instance(Rng& rng, int max_agents, int max_incentives) {
  std::uniform_int_distribution<int> agents_d(1, max_agents);
  std::uniform_int_distribution<int> incentives_d(1, max_incentives);
  const int agents = agents_d(rng);
  const int incentives = incentives_d(rng);
  const int n_edges = agents * incentives;
  std::uniform_int_distribution<int> classes_d(1, n_edges);
  const int n_classes = classes_d(rng);
  std::uniform_int_distribution<int> class_d(0, n_classes - 1);
  std::vector<int> class_of(n_edges);
  for (int& c : class_of) c = class_d(rng);
  std::uniform_int_distribution<int> cap_d(0, std::min(agents, incentives));
  std::vector<int> capacities(n_classes);
  for (int& b : capacities) b = cap_d(rng);
  std::vector<double> weights(n_edges);
  for (double& w : weights) w = uniform01(rng);
  return MatchingInstance(agents, incentives, std::move(class_of),
                          std::move(capacities), std::move(weights));
}

std::vector<std::string> run_experiment(const RunConfig& config) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);

  std::vector<std::string> written;
  switch (config.experiment) {
    case ExperimentKind::trap:
    case ExperimentKind::synthetic:
      written = run_bandit_experiment(config);
      break;
    case ExperimentKind::bikeshare:
      written = run_bikeshare_experiment(config);
      break;
    case ExperimentKind::matching_audit:
      written = run_matching_audit(config);
      break;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  nlohmann::json manifest;
  manifest["config"] = nlohmann::json::parse(config_to_json(config));
  manifest["files"] = written;
  manifest["wall_seconds"] = wall;
  manifest["started_at_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          started.time_since_epoch())
          .count();
#ifdef __VERSION__
  manifest["compiler"] = __VERSION__;
#endif
  const std::string manifest_path = config.output_dir + "/manifest.json";
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + manifest_path);
  out << manifest.dump(2) << '\n';
  written.push_back(manifest_path);
  return written;
}

}  // namespace geb

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geb/experiment.hpp"

namespace {

std::string default_output_dir() {
  const char* env = std::getenv("GEB_OUTPUT_DIR");
  return env && *env ? env : ".";
}

void apply_overrides(geb::RunConfig& config, const std::string& output,
                     long n_epochs, const std::vector<std::uint64_t>& seeds,
                     int workers) {
  if (!output.empty()) {
    config.output_dir = output;
  } else if (config.output_dir == ".") {
    config.output_dir = default_output_dir();
  }
  if (n_epochs >= 0) config.n_epochs = n_epochs;
  if (!seeds.empty()) config.seeds = seeds;
  if (workers >= 0) config.workers = workers;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epoch-mixing bandit matching experiments"};
  app.require_subcommand(1);

  std::string config_path, output;
  long n_epochs = -1;
  std::vector<std::uint64_t> seeds;
  int workers = -1;

  auto* run_cmd = app.add_subcommand("run", "Execute an experiment config");
  run_cmd->add_option("--config", config_path, "Config JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--output", output,
                      "Output directory (overrides config; default from "
                      "GEB_OUTPUT_DIR)");
  run_cmd->add_option("--n-epochs", n_epochs, "Override epoch count");
  run_cmd->add_option("--seeds", seeds, "Override seed list");
  run_cmd->add_option("--workers", workers, "Override worker count");

  auto* validate_cmd =
      app.add_subcommand("validate", "Check a config and print its normal form");
  validate_cmd->add_option("--config", config_path, "Config JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  long audit_instances = 1000;
  std::uint64_t audit_seed = 12345;
  auto* audit_cmd = app.add_subcommand(
      "audit-matching",
      "Compare the greedy matcher to the exact oracle on random instances");
  audit_cmd->add_option("--instances", audit_instances, "Instance count");
  audit_cmd->add_option("--seed", audit_seed, "Instance RNG seed");
  audit_cmd->add_option("--output", output, "Output directory");
  audit_cmd->add_option("--workers", workers, "Worker count");

  std::string trips_path, world_path = "world.json";
  std::string demand = "poisson", behavior = "bernoulli";
  std::uint64_t ingest_seed = 12345;
  int n_states = 5;
  auto* ingest_cmd = app.add_subcommand(
      "ingest-trips", "Build a bike-share world snapshot from a trips CSV");
  ingest_cmd->add_option("--input", trips_path, "Trips CSV file")
      ->required()
      ->check(CLI::ExistingFile);
  ingest_cmd->add_option("--output", world_path, "World JSON output path");
  ingest_cmd->add_option("--demand", demand, "static | poisson");
  ingest_cmd->add_option("--behavior", behavior, "bernoulli | utility");
  ingest_cmd->add_option("--seed", ingest_seed, "Latent-model RNG seed");
  ingest_cmd->add_option("--states", n_states, "Latent states per flow");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      geb::RunConfig config = geb::load_config(config_path);
      apply_overrides(config, output, n_epochs, seeds, workers);
      std::vector<std::string> files = geb::run_experiment(config);
      for (const std::string& f : files) std::cout << f << '\n';
      return 0;
    }
    if (validate_cmd->parsed()) {
      geb::RunConfig config = geb::load_config(config_path);
      std::cout << geb::config_to_json(config) << '\n';
      return 0;
    }
    if (audit_cmd->parsed()) {
      geb::RunConfig config;
      config.experiment = geb::ExperimentKind::matching_audit;
      config.n_instances = audit_instances;
      config.instance_seed = audit_seed;
      apply_overrides(config, output, -1, {}, workers);
      std::vector<std::string> files = geb::run_experiment(config);
      for (const std::string& f : files) std::cout << f << '\n';
      return 0;
    }
    if (ingest_cmd->parsed()) {
      std::ifstream in(trips_path);
      if (!in) throw std::runtime_error("cannot read " + trips_path);
      geb::IngestResult ingest = geb::ingest_trips(in);
      if (ingest.flows.empty())
        std::cerr << "warning: no trips inside the time window\n";
      geb::BikeshareWorld world = geb::world_from_ingest(
          ingest, geb::demand_mode_from_string(demand),
          geb::behavior_model_from_string(behavior), ingest_seed, n_states);
      std::ofstream out(world_path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + world_path);
      out << world.to_json_string() << '\n';
      std::cout << world_path << '\n'
                << "stations=" << world.stations.size()
                << " flows=" << world.flows.size()
                << " days=" << ingest.days
                << " rows_used=" << ingest.rows_used << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

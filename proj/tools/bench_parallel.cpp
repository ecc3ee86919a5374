// Benchmark: single-worker (serial reference) versus multi-worker OpenMP
// execution of the embarrassingly parallel workloads — the matching audit
// and a batch of independent policy runs — verifying identical outputs.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <vector>

#include "geb/experiment.hpp"
#include "geb/policy.hpp"
#include "geb/regret.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// workload 1: greedy vs exact matcher over random instances
std::pair<double, double> audit_workload(long n_instances, int workers) {
  const double t0 = now_seconds();
  double checksum = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(+ : checksum) \
    num_threads(workers)
  for (long i = 0; i < n_instances; ++i) {
    geb::Rng rng(geb::derive_seed(99, static_cast<std::uint64_t>(i)));
    geb::MatchingInstance inst = geb::random_instance(rng, 4, 5);
    checksum += geb::greedy_match(inst).total_weight(inst) +
                geb::exact_match(inst).total_weight(inst);
  }
  return {now_seconds() - t0, checksum};
}

// workload 2: independent bandit runs on the two-agent benchmark world
std::pair<double, double> run_workload(int n_runs, long n_epochs, int workers) {
  const geb::World world = geb::trap_world(0.1);
  const geb::Benchmark bench = geb::build_benchmark(world.env, world.instance);
  const double t0 = now_seconds();
  double checksum = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(+ : checksum) \
    num_threads(workers)
  for (int i = 0; i < n_runs; ++i) {
    geb::EnvironmentModel env = world.env;
    geb::PolicyConfig cfg =
        geb::PolicyConfig::make(geb::Variant::mg_eucb, env);
    geb::Rng rng(geb::derive_seed(7, static_cast<std::uint64_t>(i)));
    geb::RunTrace trace = geb::run(env, world.instance, cfg, {}, n_epochs, rng);
    checksum += geb::regret_of(trace, bench).cumulative.back();
  }
  return {now_seconds() - t0, checksum};
}

}  // namespace

int main() {
#ifdef _OPENMP
  const int max_workers = omp_get_max_threads();
#else
  const int max_workers = 1;
#endif
  std::cout << "workers available: " << max_workers << "\n";

  {
    auto [serial_t, serial_sum] = audit_workload(4000, 1);
    auto [parallel_t, parallel_sum] = audit_workload(4000, max_workers);
    std::cout << "matching audit  : serial " << serial_t << " s, parallel "
              << parallel_t << " s, speedup " << serial_t / parallel_t
              << ", outputs "
              << (serial_sum == parallel_sum ? "identical" : "DIFFER") << "\n";
    if (serial_sum != parallel_sum) return 1;
  }
  {
    auto [serial_t, serial_sum] = run_workload(16, 200, 1);
    auto [parallel_t, parallel_sum] = run_workload(16, 200, max_workers);
    std::cout << "policy run batch: serial " << serial_t << " s, parallel "
              << parallel_t << " s, speedup " << serial_t / parallel_t
              << ", outputs "
              << (serial_sum == parallel_sum ? "identical" : "DIFFER") << "\n";
    if (serial_sum != parallel_sum) return 1;
  }
  return 0;
}

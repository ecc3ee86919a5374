#include "geb/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geb {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::mg_eucb: return "MG_EUCB";
    case Variant::mg_eucb_plus: return "MG_EUCB_PLUS";
    case Variant::h_eucb: return "H_EUCB";
    case Variant::h_eucb_plus: return "H_EUCB_PLUS";
    case Variant::c_ucb: return "C_UCB";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  if (name == "MG_EUCB") return Variant::mg_eucb;
  if (name == "MG_EUCB_PLUS") return Variant::mg_eucb_plus;
  if (name == "H_EUCB") return Variant::h_eucb;
  if (name == "H_EUCB_PLUS") return Variant::h_eucb_plus;
  if (name == "C_UCB") return Variant::c_ucb;
  throw std::invalid_argument("unknown policy variant: " + name);
}

double default_log_coefficient(Variant v) {
  return (v == Variant::mg_eucb_plus || v == Variant::h_eucb_plus) ? 3.0 : 6.0;
}

PolicyConfig PolicyConfig::make(Variant v) {
  return {v, default_log_coefficient(v), {}};
}

PolicyConfig PolicyConfig::make(Variant v, const EnvironmentModel& env) {
  PolicyConfig cfg = make(v);
  cfg.mixing_constants.resize(static_cast<std::size_t>(env.agents()) *
                              env.incentives());
  for (int a = 0; a < env.agents(); ++a)
    for (int i = 0; i < env.incentives(); ++i)
      cfg.mixing_constants[static_cast<std::size_t>(a) * env.incentives() + i] =
          mixing_profile(env.arm({a, i}).kernel).c_mix;
  return cfg;
}

double q_constant(double c_mix, long k, const EpochSchedule& schedule) {
  if (k < 1) throw std::invalid_argument("q_constant: k must be >= 1");
  const double tau0 = static_cast<double>(schedule.tau0);
  const double zeta = static_cast<double>(schedule.zeta);
  if (schedule.zeta == 0) {
    // constant epochs: the underlying series degenerates to k / tau0
    return 0.5 * c_mix * static_cast<double>(k) / tau0;
  }
  return 0.5 * c_mix *
         (1.0 / (zeta + tau0) +
          std::log(1.0 + static_cast<double>(k) * zeta / tau0) / zeta);
}

double confidence_value(double c_mix, long k, long t, int m, double log_coef,
                        const EpochSchedule& schedule) {
  if (k < 1 || t < 1)
    throw std::invalid_argument("confidence: k and t must be >= 1");
  const double kk = static_cast<double>(k);
  double bonus = std::sqrt((log_coef * std::log(static_cast<double>(t)) +
                            4.0 * std::log(static_cast<double>(std::max(m, 1)))) /
                           kk);
  return q_constant(c_mix, k, schedule) / kk + bonus;
}

BanditState init_state(const MatchingInstance& shape) {
  BanditState s;
  s.cum_reward.assign(shape.num_edges(), 0.0);
  s.pulls.assign(shape.num_edges(), 1);
  s.cover_queue = initial_cover(shape);
  return s;
}

double confidence(Edge edge, const BanditState& state, const PolicyConfig& config,
                  const EpochSchedule& schedule, const MatchingInstance& shape) {
  int idx = shape.edge_index(edge);
  double c_mix =
      config.mixing_constants.empty() ? 0.0 : config.mixing_constants[idx];
  int m = std::max(shape.agents(), shape.incentives());
  return confidence_value(c_mix, state.pulls[idx], state.epoch + 1, m,
                          config.log_coefficient, schedule);
}

Matching select(const BanditState& state, const PolicyConfig& config,
                const MatchingInstance& shape, const EpochSchedule& schedule) {
  if (!state.cover_done()) return state.cover_queue[state.cover_next];
  std::vector<double> index(shape.num_edges());
  for (int i = 0; i < shape.num_edges(); ++i) {
    Edge e = shape.edge_at(i);
    double mean = state.cum_reward[i] / static_cast<double>(state.pulls[i]);
    index[i] = mean + confidence(e, state, config, schedule, shape);
  }
  MatchingInstance weighted = shape.with_weights(std::move(index));
  if (config.variant == Variant::h_eucb || config.variant == Variant::h_eucb_plus)
    return hungarian_match(weighted);
  return greedy_match(weighted);
}

void update(BanditState& state, const Matching& matching,
            const EpochResult& result, const MatchingInstance& shape) {
  if (result.edge_means.size() != matching.edges.size())
    throw std::invalid_argument("update: result does not match the matching");
  for (const auto& [edge, mean] : result.edge_means) {
    if (!matching.contains(edge))
      throw std::invalid_argument("update: result edge not in matching");
    int idx = shape.edge_index(edge);
    // cum_reward accumulates the epoch time averages; pulls started at 1, so
    // the mean estimate is biased low until the exploration bonus fades.
    state.cum_reward[idx] += mean;
    state.pulls[idx] += 1;
  }
  state.clock += result.iterations_used;
  state.epoch += 1;
  if (!state.cover_done()) state.cover_next += 1;
}

namespace {

void record_selection(std::vector<std::pair<Matching, long>>& selections,
                      const Matching& m, long count) {
  for (auto& [match, n] : selections) {
    if (match.same_edges(m)) {
      n += count;
      return;
    }
  }
  selections.emplace_back(m, count);
}

RunTrace run_c_ucb(EnvironmentModel& env, const MatchingInstance& shape,
                   const EpochSchedule& schedule, long n_epochs, Rng& rng) {
  RunTrace trace;
  const int n_edges = shape.num_edges();
  std::vector<double> reward_sum(n_edges, 0.0);
  std::vector<long> iter_pulls(n_edges, 0);
  std::vector<double> index(n_edges);
  std::vector<Matching> cover = initial_cover(shape);
  long iter = 0;
  for (long k = 0; k < n_epochs; ++k) {
    EpochRecord rec;
    rec.epoch = k;
    rec.clock_start = env.clock();
    const long tau = schedule.tau(k);
    double bucket_total = 0.0;
    for (long t = 0; t < tau; ++t) {
      Matching m;
      if (iter < static_cast<long>(cover.size())) {
        m = cover[iter];
      } else {
        const double logt = std::log(static_cast<double>(iter + 1));
        for (int i = 0; i < n_edges; ++i)
          index[i] = reward_sum[i] / static_cast<double>(iter_pulls[i]) +
                     std::sqrt(2.0 * logt / static_cast<double>(iter_pulls[i]));
        m = greedy_match(shape.with_weights(index));
      }
      for (Edge e : m.edges) {
        const ArmModel& arm = env.arm(e);
        int state = env.current_state(e.agent);
        double r = arm.rewards_by_state[state].sample(rng);
        env.set_current_state(e.agent, step(arm.kernel, state, rng));
        int idx = shape.edge_index(e);
        reward_sum[idx] += r;
        iter_pulls[idx] += 1;
        bucket_total += r;
      }
      env.advance_clock(1);
      ++iter;
      record_selection(rec.selections, m, 1);
    }
    rec.iterations = tau;
    rec.realized = bucket_total / static_cast<double>(tau);
    trace.epochs.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace

RunTrace run(EnvironmentModel& env, const MatchingInstance& shape,
             const PolicyConfig& config, const EpochSchedule& schedule,
             long n_epochs, Rng& rng) {
  if (env.agents() != shape.agents() || env.incentives() != shape.incentives())
    throw std::invalid_argument("run: environment and instance shape disagree");
  if (config.variant == Variant::c_ucb)
    return run_c_ucb(env, shape, schedule, n_epochs, rng);

  RunTrace trace;
  BanditState state = init_state(shape);
  const long total = static_cast<long>(state.cover_queue.size()) + n_epochs;
  for (long k = 0; k < total; ++k) {
    Matching m = select(state, config, shape, schedule);
    EpochRecord rec;
    if (config.record_indices && state.cover_done()) {
      rec.indices.resize(shape.num_edges());
      for (int i = 0; i < shape.num_edges(); ++i) {
        double mean =
            state.cum_reward[i] / static_cast<double>(state.pulls[i]);
        rec.indices[i] =
            mean + confidence(shape.edge_at(i), state, config, schedule, shape);
      }
    }
    EpochResult result =
        play_epoch(env, m, schedule.tau(k), rng, schedule.early_stop);
    update(state, m, result, shape);
    rec.epoch = k;
    rec.clock_start = result.start_time;
    rec.iterations = result.iterations_used;
    for (const auto& [edge, mean] : result.edge_means) rec.realized += mean;
    rec.selections.emplace_back(std::move(m), 1);
    trace.epochs.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace geb

#include "geb/environment.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace geb {

RewardDistribution RewardDistribution::bernoulli(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli: p outside [0,1]");
  return {Kind::bernoulli, p, 0.0};
}

RewardDistribution RewardDistribution::uniform(double lo, double hi) {
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0))
    throw std::invalid_argument("uniform: need 0 <= lo <= hi <= 1");
  return {Kind::uniform, lo, hi};
}

RewardDistribution RewardDistribution::beta(double alpha, double beta) {
  if (alpha <= 0.0 || beta <= 0.0)
    throw std::invalid_argument("beta: parameters must be positive");
  return {Kind::beta, alpha, beta};
}

RewardDistribution RewardDistribution::deterministic(double v) {
  if (v < 0.0 || v > 1.0)
    throw std::invalid_argument("deterministic: value outside [0,1]");
  return {Kind::deterministic, v, 0.0};
}

double RewardDistribution::mean() const {
  switch (kind) {
    case Kind::bernoulli: return a;
    case Kind::uniform: return 0.5 * (a + b);
    case Kind::beta: return a / (a + b);
    case Kind::deterministic: return a;
  }
  return 0.0;
}

double RewardDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::bernoulli:
      return uniform01(rng) < a ? 1.0 : 0.0;
    case Kind::uniform:
      return a + (b - a) * uniform01(rng);
    case Kind::beta: {
      double x = std::gamma_distribution<double>(a, 1.0)(rng);
      double y = std::gamma_distribution<double>(b, 1.0)(rng);
      double v = (x + y > 0.0) ? x / (x + y) : 0.5;
      return std::clamp(v, 0.0, 1.0);
    }
    case Kind::deterministic:
      return a;
  }
  return 0.0;
}

EnvironmentModel::EnvironmentModel(int m_agents, int m_incentives,
                                   std::vector<int> state_space_sizes,
                                   std::vector<ArmModel> arms,
                                   std::vector<int> initial_states)
    : m_agents_(m_agents),
      m_incentives_(m_incentives),
      state_space_sizes_(std::move(state_space_sizes)),
      arms_(std::move(arms)),
      current_states_(std::move(initial_states)) {
  if (m_agents_ < 0 || m_incentives_ < 0)
    throw std::invalid_argument("environment: negative dimensions");
  if (state_space_sizes_.size() != static_cast<std::size_t>(m_agents_))
    throw std::invalid_argument("environment: one state space size per agent");
  if (arms_.size() != static_cast<std::size_t>(m_agents_) * m_incentives_)
    throw std::invalid_argument("environment: one arm per edge");
  if (current_states_.size() != static_cast<std::size_t>(m_agents_))
    throw std::invalid_argument("environment: one current state per agent");
  for (int a = 0; a < m_agents_; ++a) {
    for (int i = 0; i < m_incentives_; ++i) {
      const ArmModel& arm = arms_[static_cast<std::size_t>(a) * m_incentives_ + i];
      if (arm.kernel.states() != state_space_sizes_[a])
        throw std::invalid_argument(
            "environment: all arms of an agent must share its state space");
      if (arm.rewards_by_state.size() !=
          static_cast<std::size_t>(state_space_sizes_[a]))
        throw std::invalid_argument(
            "environment: one reward distribution per state");
    }
    if (current_states_[a] < 0 || current_states_[a] >= state_space_sizes_[a])
      throw std::invalid_argument("environment: invalid current state");
  }
}

void EnvironmentModel::set_current_state(int agent, int state) {
  if (agent < 0 || agent >= m_agents_ || state < 0 ||
      state >= state_space_sizes_[agent])
    throw std::invalid_argument("environment: invalid agent/state");
  current_states_[agent] = state;
}

EpochResult play_epoch(EnvironmentModel& env, const Matching& matching, long tau,
                       Rng& rng, const std::optional<EarlyStop>& early_stop) {
  if (tau < 1) throw std::invalid_argument("play_epoch: tau must be >= 1");
  std::vector<char> agent_seen(env.agents(), 0);
  for (Edge e : matching.edges) {
    if (e.agent < 0 || e.agent >= env.agents() || e.incentive < 0 ||
        e.incentive >= env.incentives())
      throw std::invalid_argument("play_epoch: matching outside environment");
    if (agent_seen[e.agent])
      throw std::invalid_argument("play_epoch: agent matched twice");
    agent_seen[e.agent] = 1;
  }

  EpochResult out;
  out.start_time = env.clock();
  std::vector<double> sums(matching.edges.size(), 0.0);
  double prev_avg = 0.0;
  int stable = 0;
  long t = 0;
  for (; t < tau; ++t) {
    double total = 0.0;
    for (std::size_t k = 0; k < matching.edges.size(); ++k) {
      Edge e = matching.edges[k];
      const ArmModel& arm = env.arm(e);
      int state = env.current_state(e.agent);
      double r = arm.rewards_by_state[state].sample(rng);
      sums[k] += r;
      total += sums[k];
      env.set_current_state(e.agent, step(arm.kernel, state, rng));
    }
    if (early_stop) {
      double avg = total / static_cast<double>(t + 1);
      if (t > 0 && std::abs(avg - prev_avg) <= early_stop->delta)
        ++stable;
      else
        stable = 0;
      prev_avg = avg;
      if (stable >= early_stop->patience) {
        ++t;
        break;
      }
    }
  }
  out.iterations_used = t;
  env.advance_clock(t);
  out.edge_means.reserve(matching.edges.size());
  for (std::size_t k = 0; k < matching.edges.size(); ++k)
    out.edge_means.emplace_back(matching.edges[k],
                                sums[k] / static_cast<double>(t));
  return out;
}

double stationary_mean(const EnvironmentModel& env, Edge edge) {
  const ArmModel& arm = env.arm(edge);
  auto pi = stationary(arm.kernel).probabilities;
  double mu = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s)
    mu += arm.rewards_by_state[s].mean() * pi[s];
  return mu;
}

World trap_world(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("trap: epsilon must lie in (0,1)");
  // Optimum-matching edges: state 1 absorbs up to an epsilon leak and pays 1.
  TransitionKernel sticky(2, {0.0, 1.0, epsilon, 1.0 - epsilon});
  // Cross edges: pulled back to state 0, flat reward 0.5.
  TransitionKernel reset(2, {1.0 - epsilon, epsilon, 1.0, 0.0});
  ArmModel opt{sticky, {RewardDistribution::deterministic(0.0),
                        RewardDistribution::deterministic(1.0)}};
  ArmModel flat{reset, {RewardDistribution::deterministic(0.5),
                        RewardDistribution::deterministic(0.5)}};
  std::vector<ArmModel> arms{opt, flat, flat, opt};  // (a1,i1),(a1,i2),(a2,i1),(a2,i2)
  EnvironmentModel env(2, 2, {2, 2}, std::move(arms), {0, 0});
  std::vector<double> mu(4);
  for (int idx = 0; idx < 4; ++idx) mu[idx] = stationary_mean(env, {idx / 2, idx % 2});
  MatchingInstance inst = MatchingInstance::single_class(2, 2, std::move(mu), 2);
  return {std::move(env), std::move(inst)};
}

const char* to_string(RewardFamily family) {
  switch (family) {
    case RewardFamily::bernoulli: return "bernoulli";
    case RewardFamily::uniform: return "uniform";
    case RewardFamily::beta: return "beta";
    case RewardFamily::mixed: return "mixed";
  }
  return "?";
}

RewardFamily reward_family_from_string(const std::string& name) {
  if (name == "bernoulli") return RewardFamily::bernoulli;
  if (name == "uniform") return RewardFamily::uniform;
  if (name == "beta") return RewardFamily::beta;
  if (name == "mixed") return RewardFamily::mixed;
  throw std::invalid_argument("unknown reward family: " + name);
}

namespace {

TransitionKernel random_kernel(int n_states, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<double> rows(static_cast<std::size_t>(n_states) * n_states);
    for (int i = 0; i < n_states; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n_states; ++j) {
        double v = uniform01(rng);
        rows[static_cast<std::size_t>(i) * n_states + j] = v;
        sum += v;
      }
      for (int j = 0; j < n_states; ++j)
        rows[static_cast<std::size_t>(i) * n_states + j] /= sum;
    }
    TransitionKernel k(n_states, std::move(rows));
    auto v = validate(k);
    if (v.irreducible && v.aperiodic) return k;
  }
  throw std::runtime_error("generate_synthetic: kernel resampling exhausted");
}

RewardDistribution random_reward(RewardFamily family, Rng& rng) {
  RewardFamily f = family;
  if (f == RewardFamily::mixed) {
    int pick = static_cast<int>(uniform01(rng) * 3.0);
    f = pick == 0 ? RewardFamily::bernoulli
        : pick == 1 ? RewardFamily::uniform
                    : RewardFamily::beta;
  }
  switch (f) {
    case RewardFamily::bernoulli:
      return RewardDistribution::bernoulli(uniform01(rng));
    case RewardFamily::uniform: {
      double x = uniform01(rng), y = uniform01(rng);
      return RewardDistribution::uniform(std::min(x, y), std::max(x, y));
    }
    case RewardFamily::beta: {
      double alpha = 0.5 + 4.5 * uniform01(rng);
      double beta = 0.5 + 4.5 * uniform01(rng);
      return RewardDistribution::beta(alpha, beta);
    }
    default:
      break;
  }
  return RewardDistribution::deterministic(0.0);
}

}  // namespace

World generate_synthetic(int m, int n_states, RewardFamily family,
                         std::uint64_t seed) {
  if (m < 1 || n_states < 1)
    throw std::invalid_argument("generate_synthetic: m and n_states must be >= 1");
  Rng rng(seed);
  std::vector<ArmModel> arms;
  arms.reserve(static_cast<std::size_t>(m) * m);
  for (int a = 0; a < m; ++a) {
    for (int i = 0; i < m; ++i) {
      ArmModel arm{random_kernel(n_states, rng), {}};
      arm.rewards_by_state.reserve(n_states);
      for (int s = 0; s < n_states; ++s)
        arm.rewards_by_state.push_back(random_reward(family, rng));
      arms.push_back(std::move(arm));
    }
  }
  EnvironmentModel env(m, m, std::vector<int>(m, n_states), std::move(arms),
                       std::vector<int>(m, 0));
  std::vector<double> mu(static_cast<std::size_t>(m) * m);
  for (int idx = 0; idx < m * m; ++idx)
    mu[idx] = stationary_mean(env, {idx / m, idx % m});
  MatchingInstance inst = MatchingInstance::single_class(m, m, std::move(mu), m);
  return {std::move(env), std::move(inst)};
}

namespace {

nlohmann::json reward_to_json(const RewardDistribution& r) {
  const char* kind = r.kind == RewardDistribution::Kind::bernoulli  ? "bernoulli"
                     : r.kind == RewardDistribution::Kind::uniform  ? "uniform"
                     : r.kind == RewardDistribution::Kind::beta     ? "beta"
                                                                    : "deterministic";
  return {{"kind", kind}, {"a", r.a}, {"b", r.b}};
}

RewardDistribution reward_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  double a = j.at("a").get<double>(), b = j.at("b").get<double>();
  if (kind == "bernoulli") return RewardDistribution::bernoulli(a);
  if (kind == "uniform") return RewardDistribution::uniform(a, b);
  if (kind == "beta") return RewardDistribution::beta(a, b);
  if (kind == "deterministic") return RewardDistribution::deterministic(a);
  throw std::invalid_argument("unknown reward kind: " + kind);
}

}  // namespace

std::string EnvironmentModel::to_json_string() const {
  nlohmann::json j;
  j["agents"] = m_agents_;
  j["incentives"] = m_incentives_;
  j["state_space_sizes"] = state_space_sizes_;
  j["current_states"] = current_states_;
  nlohmann::json arms = nlohmann::json::array();
  for (const ArmModel& arm : arms_) {
    nlohmann::json rewards = nlohmann::json::array();
    for (const auto& r : arm.rewards_by_state) rewards.push_back(reward_to_json(r));
    arms.push_back({{"kernel", nlohmann::json::parse(arm.kernel.to_json_string())},
                    {"rewards", rewards}});
  }
  j["arms"] = arms;
  return j.dump();
}

EnvironmentModel EnvironmentModel::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::vector<ArmModel> arms;
  for (const auto& aj : j.at("arms")) {
    ArmModel arm{TransitionKernel::from_json_string(aj.at("kernel").dump()), {}};
    for (const auto& rj : aj.at("rewards"))
      arm.rewards_by_state.push_back(reward_from_json(rj));
    arms.push_back(std::move(arm));
  }
  return EnvironmentModel(j.at("agents").get<int>(), j.at("incentives").get<int>(),
                          j.at("state_space_sizes").get<std::vector<int>>(),
                          std::move(arms),
                          j.at("current_states").get<std::vector<int>>());
}

}  // namespace geb

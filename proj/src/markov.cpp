#include "geb/markov.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace geb {

namespace {
constexpr double kRowSumTol = 1e-12;
}

TransitionKernel::TransitionKernel(int states, std::vector<double> rows)
    : states_(states), rows_(std::move(rows)) {
  if (states_ <= 0) throw std::invalid_argument("kernel: need at least one state");
  if (rows_.size() != static_cast<std::size_t>(states_) * states_)
    throw std::invalid_argument("kernel: row data does not match state count");
  for (int i = 0; i < states_; ++i) {
    double sum = 0.0;
    for (int j = 0; j < states_; ++j) {
      double p = at(i, j);
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("kernel: entries must lie in [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("kernel: row " + std::to_string(i) +
                                  " does not sum to 1");
  }
}

std::string TransitionKernel::to_json_string() const {
  nlohmann::json j;
  j["states"] = states_;
  std::vector<std::vector<double>> rows(states_);
  for (int i = 0; i < states_; ++i)
    rows[i].assign(rows_.begin() + static_cast<std::size_t>(i) * states_,
                   rows_.begin() + static_cast<std::size_t>(i + 1) * states_);
  j["rows"] = rows;
  return j.dump();
}

TransitionKernel TransitionKernel::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  int states = j.at("states").get<int>();
  auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return TransitionKernel(states, std::move(flat));
}

namespace {

std::vector<std::vector<int>> positive_adjacency(const TransitionKernel& k) {
  std::vector<std::vector<int>> adj(k.states());
  for (int i = 0; i < k.states(); ++i)
    for (int j = 0; j < k.states(); ++j)
      if (k.at(i, j) > 0.0) adj[i].push_back(j);
  return adj;
}

std::vector<char> reachable(const std::vector<std::vector<int>>& adj, int from) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<int> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
  }
  return seen;
}

}  // namespace

KernelValidation validate(const TransitionKernel& kernel) {
  const int n = kernel.states();
  auto adj = positive_adjacency(kernel);
  std::vector<std::vector<int>> radj(n);
  for (int i = 0; i < n; ++i)
    for (int j : adj[i]) radj[j].push_back(i);

  auto fwd = reachable(adj, 0);
  auto bwd = reachable(radj, 0);
  bool irreducible = true;
  for (int i = 0; i < n; ++i) irreducible = irreducible && fwd[i] && bwd[i];

  // Period of state 0 within its communicating class: gcd of d(u)+1-d(v)
  // over edges (u,v) inside the class, with d a BFS labelling from 0.
  std::vector<char> in_class(n, 0);
  for (int i = 0; i < n; ++i) in_class[i] = fwd[i] && bwd[i];
  std::vector<int> depth(n, -1);
  std::vector<int> queue{0};
  depth[0] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    int v = queue[h];
    for (int w : adj[v]) {
      if (!in_class[w]) continue;
      if (depth[w] < 0) {
        depth[w] = depth[v] + 1;
        queue.push_back(w);
      }
    }
  }
  long long g = 0;
  for (int u = 0; u < n; ++u) {
    if (!in_class[u] || depth[u] < 0) continue;
    for (int v : adj[u]) {
      if (!in_class[v] || depth[v] < 0) continue;
      g = std::gcd(g, static_cast<long long>(depth[u] + 1 - depth[v]));
    }
  }
  return {irreducible, g == 1};
}

StationaryDistribution stationary(const TransitionKernel& kernel) {
  if (!validate(kernel).irreducible)
    throw std::runtime_error("stationary: chain is reducible");
  const int n = kernel.states();
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      A(i, j) = kernel.at(j, i) - (i == j ? 1.0 : 0.0);  // (P^T - I)
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  A.row(n - 1).setOnes();  // normalization replaces one balance equation
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = A.fullPivLu().solve(b);
  StationaryDistribution out;
  out.probabilities.resize(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out.probabilities[i] = std::max(pi(i), 0.0);
    sum += out.probabilities[i];
  }
  for (double& p : out.probabilities) p /= sum;
  return out;
}

TransitionKernel reversiblization(const TransitionKernel& kernel) {
  auto pi = stationary(kernel).probabilities;
  for (double p : pi)
    if (p <= 0.0)
      throw std::runtime_error("reversiblization: stationary mass must be positive");
  const int n = kernel.states();
  // M(s,s'') = sum_s' P(s,s') pi(s'') P(s'',s') / pi(s')
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      double acc = 0.0;
      for (int q = 0; q < n; ++q)
        acc += kernel.at(s, q) * pi[t] * kernel.at(t, q) / pi[q];
      m[static_cast<std::size_t>(s) * n + t] = acc;
    }
    // renormalize away accumulated round-off so the ctor accepts the row
    double sum = 0.0;
    for (int t = 0; t < n; ++t) sum += m[static_cast<std::size_t>(s) * n + t];
    for (int t = 0; t < n; ++t) m[static_cast<std::size_t>(s) * n + t] /= sum;
  }
  return TransitionKernel(n, std::move(m));
}

MixingProfile mixing_profile(const TransitionKernel& kernel) {
  auto v = validate(kernel);
  if (!v.irreducible) throw std::runtime_error("mixing_profile: chain is reducible");
  if (!v.aperiodic) throw std::runtime_error("mixing_profile: chain is periodic");
  const int n = kernel.states();
  auto pi = stationary(kernel).probabilities;
  double pi_min = *std::min_element(pi.begin(), pi.end());
  MixingProfile out;
  out.pi_min = pi_min;
  if (n == 1) return out;  // lambda = 0, c_mix = 0
  TransitionKernel M = reversiblization(kernel);
  // Similarity transform D^{1/2} M D^{-1/2} is symmetric because M is
  // pi-reversible, so a symmetric eigensolver applies.
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      S(i, j) = std::sqrt(pi[i]) * M.at(i, j) / std::sqrt(pi[j]);
  S = 0.5 * (S + S.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  double lambda1 = es.eigenvalues()(n - 2);  // second largest; the top one is 1
  lambda1 = std::clamp(lambda1, 0.0, 1.0 - 1e-15);
  out.lambda = std::sqrt(lambda1);
  out.c_mix = std::sqrt(static_cast<double>(n)) * (1.0 - pi_min) /
              (2.0 * std::sqrt(pi_min)) / (1.0 - out.lambda);
  return out;
}

int step(const TransitionKernel& kernel, int state, Rng& rng) {
  if (state < 0 || state >= kernel.states())
    throw std::invalid_argument("step: state index out of range");
  double u = uniform01(rng);
  double acc = 0.0;
  for (int j = 0; j < kernel.states(); ++j) {
    acc += kernel.at(state, j);
    if (u < acc) return j;
  }
  return kernel.states() - 1;
}

double chi_squared(std::span<const double> dist, const StationaryDistribution& pi) {
  if (dist.size() != pi.probabilities.size())
    throw std::invalid_argument("chi_squared: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    double p = pi.probabilities[i];
    if (p <= 0.0) throw std::runtime_error("chi_squared: zero stationary mass");
    double d = dist[i] - p;
    acc += d * d / p;
  }
  return acc;
}

}  // namespace geb

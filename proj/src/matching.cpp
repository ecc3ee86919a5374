#include "geb/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace geb {

MatchingInstance::MatchingInstance(int agents, int incentives,
                                   std::vector<int> class_of,
                                   std::vector<int> capacities,
                                   std::vector<double> weights)
    : agents_(agents),
      incentives_(incentives),
      class_of_(std::move(class_of)),
      capacities_(std::move(capacities)),
      weights_(std::move(weights)) {
  if (agents_ < 0 || incentives_ < 0)
    throw std::invalid_argument("matching: negative dimensions");
  const std::size_t n = static_cast<std::size_t>(agents_) * incentives_;
  if (class_of_.size() != n)
    throw std::invalid_argument("matching: class_of must cover every edge");
  if (weights_.size() != n)
    throw std::invalid_argument("matching: weights must cover every edge");
  for (int c : class_of_) {
    if (c < 0 || c >= num_classes())
      throw std::invalid_argument("matching: class index out of range");
  }
  for (int b : capacities_) {
    if (b < 0) throw std::invalid_argument("matching: negative capacity");
  }
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("matching: weights must be finite and >= 0");
  }
}

MatchingInstance MatchingInstance::single_class(int agents, int incentives,
                                                std::vector<double> weights,
                                                int capacity) {
  std::vector<int> cls(static_cast<std::size_t>(agents) * incentives, 0);
  return MatchingInstance(agents, incentives, std::move(cls), {capacity},
                          std::move(weights));
}

MatchingInstance MatchingInstance::with_weights(
    std::vector<double> weights) const {
  return MatchingInstance(agents_, incentives_, class_of_, capacities_,
                          std::move(weights));
}

bool MatchingInstance::same_structure(const MatchingInstance& other) const {
  return agents_ == other.agents_ && incentives_ == other.incentives_ &&
         class_of_ == other.class_of_ && capacities_ == other.capacities_;
}

std::string MatchingInstance::to_json_string() const {
  nlohmann::json j;
  j["agents"] = agents_;
  j["incentives"] = incentives_;
  std::vector<std::vector<std::vector<int>>> classes(num_classes());
  for (int idx = 0; idx < num_edges(); ++idx) {
    Edge e = edge_at(idx);
    classes[class_of_[idx]].push_back({e.agent, e.incentive});
  }
  j["classes"] = classes;
  j["capacities"] = capacities_;
  std::vector<std::vector<double>> rows(agents_);
  for (int a = 0; a < agents_; ++a)
    rows[a].assign(weights_.begin() + static_cast<std::size_t>(a) * incentives_,
                   weights_.begin() + static_cast<std::size_t>(a + 1) * incentives_);
  j["weights"] = rows;
  return j.dump(2);
}

MatchingInstance MatchingInstance::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  int agents = j.at("agents").get<int>();
  int incentives = j.at("incentives").get<int>();
  auto classes = j.at("classes").get<std::vector<std::vector<std::vector<int>>>>();
  auto capacities = j.at("capacities").get<std::vector<int>>();
  auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
  std::vector<int> class_of(static_cast<std::size_t>(agents) * incentives, -1);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (const auto& pair : classes[c]) {
      if (pair.size() != 2) throw std::invalid_argument("matching: bad class entry");
      class_of[static_cast<std::size_t>(pair[0]) * incentives + pair[1]] =
          static_cast<int>(c);
    }
  }
  for (int c : class_of)
    if (c < 0) throw std::invalid_argument("matching: classes do not cover P");
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(agents) * incentives);
  for (const auto& row : rows)
    weights.insert(weights.end(), row.begin(), row.end());
  return MatchingInstance(agents, incentives, std::move(class_of),
                          std::move(capacities), std::move(weights));
}

double Matching::total_weight(const MatchingInstance& inst) const {
  double w = 0.0;
  for (Edge e : edges) w += inst.weight(e);
  return w;
}

bool Matching::contains(Edge e) const {
  return std::find(edges.begin(), edges.end(), e) != edges.end();
}

bool Matching::same_edges(const Matching& other) const {
  if (edges.size() != other.edges.size()) return false;
  std::vector<Edge> a = edges, b = other.edges;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

bool is_feasible(const MatchingInstance& inst, const Matching& m) {
  std::vector<char> agent_used(inst.agents(), 0), inc_used(inst.incentives(), 0);
  std::vector<int> class_count(inst.num_classes(), 0);
  for (Edge e : m.edges) {
    if (e.agent < 0 || e.agent >= inst.agents() || e.incentive < 0 ||
        e.incentive >= inst.incentives())
      return false;
    if (agent_used[e.agent] || inc_used[e.incentive]) return false;
    int c = inst.class_of(e);
    if (++class_count[c] > inst.capacity(c)) return false;
    agent_used[e.agent] = 1;
    inc_used[e.incentive] = 1;
  }
  return true;
}

namespace {

// Edge indices sorted by weight descending, ties by (agent, incentive).
std::vector<int> sorted_edge_order(const MatchingInstance& inst) {
  std::vector<int> order(inst.num_edges());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    double wl = inst.weight(inst.edge_at(lhs));
    double wr = inst.weight(inst.edge_at(rhs));
    if (wl != wr) return wl > wr;
    return lhs < rhs;  // row-major index order == lexicographic (agent, incentive)
  });
  return order;
}

}  // namespace

Matching greedy_match(const MatchingInstance& inst) {
  Matching out;
  std::vector<char> agent_used(inst.agents(), 0), inc_used(inst.incentives(), 0);
  std::vector<int> class_count(inst.num_classes(), 0);
  for (int idx : sorted_edge_order(inst)) {
    Edge e = inst.edge_at(idx);
    if (agent_used[e.agent] || inc_used[e.incentive]) continue;
    int c = inst.class_of(e);
    if (class_count[c] >= inst.capacity(c)) continue;  // saturated class: drop edge only
    out.edges.push_back(e);
    agent_used[e.agent] = 1;
    inc_used[e.incentive] = 1;
    ++class_count[c];
  }
  return out;
}

namespace {

struct BnBState {
  const MatchingInstance& inst;
  const std::vector<int>& order;  // candidate edge indices, weight descending
  std::vector<char> agent_used, inc_used;
  std::vector<int> class_left;
  std::vector<int> chosen;
  std::vector<int> best;
  double weight = 0.0;
  double best_weight = -1.0;

  // Fractional relaxation by class: remaining edges capped only by residual
  // class capacity.
  double bound(std::size_t from) const {
    double b = weight;
    std::vector<int> left = class_left;
    for (std::size_t i = from; i < order.size(); ++i) {
      Edge e = inst.edge_at(order[i]);
      int c = inst.class_of(e);
      if (left[c] > 0) {
        --left[c];
        b += inst.weight(e);
      }
    }
    return b;
  }

  void dfs(std::size_t i) {
    if (bound(i) <= best_weight) return;
    if (i == order.size()) {
      if (weight > best_weight) {
        best_weight = weight;
        best = chosen;
      }
      return;
    }
    Edge e = inst.edge_at(order[i]);
    int c = inst.class_of(e);
    if (!agent_used[e.agent] && !inc_used[e.incentive] && class_left[c] > 0) {
      agent_used[e.agent] = inc_used[e.incentive] = 1;
      --class_left[c];
      weight += inst.weight(e);
      chosen.push_back(order[i]);
      dfs(i + 1);
      chosen.pop_back();
      weight -= inst.weight(e);
      ++class_left[c];
      agent_used[e.agent] = inc_used[e.incentive] = 0;
    }
    dfs(i + 1);
  }
};

}  // namespace

Matching exact_match(const MatchingInstance& inst, std::size_t max_edges) {
  std::vector<int> candidates;
  for (int idx : sorted_edge_order(inst)) {
    Edge e = inst.edge_at(idx);
    if (inst.weight(e) > 0.0 && inst.capacity(inst.class_of(e)) > 0)
      candidates.push_back(idx);
  }
  if (candidates.size() > max_edges)
    throw std::runtime_error(
        "exact_match: instance too large for the exhaustive oracle (" +
        std::to_string(candidates.size()) + " > " + std::to_string(max_edges) +
        " edges)");
  BnBState state{inst,
                 candidates,
                 std::vector<char>(inst.agents(), 0),
                 std::vector<char>(inst.incentives(), 0),
                 {},
                 {},
                 {}};
  state.class_left.resize(inst.num_classes());
  for (int c = 0; c < inst.num_classes(); ++c) state.class_left[c] = inst.capacity(c);
  state.dfs(0);
  Matching out;
  for (int idx : state.best) out.edges.push_back(inst.edge_at(idx));
  return out;
}

Matching hungarian_match(const MatchingInstance& inst) {
  const int lo = std::min(inst.agents(), inst.incentives());
  for (int c = 0; c < inst.num_classes(); ++c) {
    if (inst.capacity(c) < lo)
      throw std::runtime_error(
          "hungarian_match: binding class capacities (method ignores classes)");
  }
  const int n = std::max(inst.agents(), inst.incentives());
  if (n == 0) return {};
  // Kuhn-Munkres with potentials on the square matrix padded with zeros,
  // minimizing negated weights.
  auto cost = [&](int a, int i) {
    if (a >= inst.agents() || i >= inst.incentives()) return 0.0;
    return -inst.weight({a, i});
  };
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int a = 1; a <= n; ++a) {
    p[0] = a;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  Matching out;
  for (int j = 1; j <= n; ++j) {
    int a = p[j] - 1, i = j - 1;
    if (a < inst.agents() && i < inst.incentives())
      out.edges.push_back({a, i});
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

InfeasibilityDecomposition decompose(const MatchingInstance& inst) {
  InfeasibilityDecomposition out;
  out.greedy_edges = greedy_match(inst).edges;
  const std::size_t m = out.greedy_edges.size();
  // Degenerate case: nothing was selectable (e.g. all capacities zero); the
  // whole edge set is infeasible outright and forms a single marginal set.
  if (m == 0) {
    if (inst.num_edges() > 0) {
      out.marginal_sets.emplace_back();
      for (int idx = 0; idx < inst.num_edges(); ++idx)
        out.marginal_sets[0].push_back(inst.edge_at(idx));
    }
    return out;
  }
  out.marginal_sets.assign(m, {});
  // Prefix occupancy after each greedy edge.
  std::vector<int> agent_rank(inst.agents(), -1), inc_rank(inst.incentives(), -1);
  std::vector<std::vector<int>> class_fill_rank(inst.num_classes());
  for (std::size_t j = 0; j < m; ++j) {
    Edge g = out.greedy_edges[j];
    agent_rank[g.agent] = static_cast<int>(j);
    inc_rank[g.incentive] = static_cast<int>(j);
    class_fill_rank[inst.class_of(g)].push_back(static_cast<int>(j));
  }
  Matching gstar{out.greedy_edges};
  for (int idx = 0; idx < inst.num_edges(); ++idx) {
    Edge e = inst.edge_at(idx);
    if (gstar.contains(e)) continue;
    int first = std::numeric_limits<int>::max();
    if (agent_rank[e.agent] >= 0) first = std::min(first, agent_rank[e.agent]);
    if (inc_rank[e.incentive] >= 0) first = std::min(first, inc_rank[e.incentive]);
    int c = inst.class_of(e);
    int cap = inst.capacity(c);
    if (cap == 0) {
      first = 0;  // infeasible from the start; charged to L_1
    } else if (static_cast<int>(class_fill_rank[c].size()) >= cap) {
      first = std::min(first, class_fill_rank[c][cap - 1]);
    }
    if (first == std::numeric_limits<int>::max())
      throw std::logic_error("decompose: edge feasible w.r.t. full greedy matching");
    out.marginal_sets[first].push_back(e);
  }
  return out;
}

DivergenceWitness check_divergence_witness(const MatchingInstance& inst_w,
                          const MatchingInstance& inst_w2) {
  if (!inst_w.same_structure(inst_w2))
    throw std::invalid_argument("check_divergence_witness: instances differ beyond weights");
  Matching g = greedy_match(inst_w);
  Matching g2 = greedy_match(inst_w2);
  if (g.same_edges(g2)) return {DivergenceWitness::Kind::identical, {}, {}};
  // "Outranks" follows the greedy scan order exactly: higher weight wins, a
  // tie falls back to lexicographic (agent, incentive) order.
  const auto outranks = [&](Edge e, Edge over) {
    const double we = inst_w2.weight(e), wo = inst_w2.weight(over);
    if (we != wo) return we > wo;
    return inst_w2.edge_index(e) < inst_w2.edge_index(over);
  };
  // E1: an inversion within G* under w~ with the later edge selected.
  for (std::size_t j = 0; j < g.edges.size(); ++j) {
    for (std::size_t jp = j + 1; jp < g.edges.size(); ++jp) {
      if (outranks(g.edges[jp], g.edges[j]) && g2.contains(g.edges[jp]))
        return {DivergenceWitness::Kind::inversion, g.edges[j], g.edges[jp]};
    }
  }
  // E2: a marginal-set edge outranking its greedy anchor under w~ and selected.
  InfeasibilityDecomposition dec = decompose(inst_w);
  for (std::size_t j = 0; j < dec.greedy_edges.size(); ++j) {
    for (Edge e : dec.marginal_sets[j]) {
      if (outranks(e, dec.greedy_edges[j]) && g2.contains(e))
        return {DivergenceWitness::Kind::overtake, dec.greedy_edges[j], e};
    }
  }
  throw std::logic_error("check_divergence_witness: differing outputs without a witness");
}

std::vector<Matching> initial_cover(const MatchingInstance& inst) {
  for (int idx = 0; idx < inst.num_edges(); ++idx) {
    Edge e = inst.edge_at(idx);
    if (inst.capacity(inst.class_of(e)) == 0)
      throw std::runtime_error(
          "initial_cover: class capacity 0 leaves edges unplayable");
  }
  const int mA = inst.agents(), mI = inst.incentives();
  if (mA == 0 || mI == 0) return {};
  bool nonbinding = true;
  for (int c = 0; c < inst.num_classes(); ++c)
    nonbinding = nonbinding && inst.capacity(c) >= std::min(mA, mI);
  if (mA == mI && nonbinding) {
    // Latin-square rotation: exactly m perfect matchings.
    std::vector<Matching> cover(mA);
    for (int r = 0; r < mA; ++r)
      for (int a = 0; a < mA; ++a)
        cover[r].edges.push_back({a, (a + r) % mA});
    return cover;
  }
  std::vector<char> covered(inst.num_edges(), 0);
  int remaining = inst.num_edges();
  std::vector<Matching> cover;
  while (remaining > 0) {
    Matching m;
    std::vector<char> agent_used(mA, 0), inc_used(mI, 0);
    std::vector<int> class_count(inst.num_classes(), 0);
    for (int idx = 0; idx < inst.num_edges(); ++idx) {
      if (covered[idx]) continue;
      Edge e = inst.edge_at(idx);
      int c = inst.class_of(e);
      if (agent_used[e.agent] || inc_used[e.incentive] ||
          class_count[c] >= inst.capacity(c))
        continue;
      m.edges.push_back(e);
      agent_used[e.agent] = 1;
      inc_used[e.incentive] = 1;
      ++class_count[c];
    }
    if (m.edges.empty())
      throw std::logic_error("initial_cover: no progress on uncovered edges");
    for (Edge e : m.edges) covered[inst.edge_index(e)] = 1;
    remaining -= static_cast<int>(m.edges.size());
    cover.push_back(std::move(m));
  }
  return cover;
}

}  // namespace geb

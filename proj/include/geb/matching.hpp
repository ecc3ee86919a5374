#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

namespace geb {

/// An agent-incentive pair. Edges are the arms of the bandit layer.
struct Edge {
  int agent = 0;
  int incentive = 0;
  auto operator<=>(const Edge&) const = default;
};

/// A capacitated bipartite matching instance: every (agent, incentive) pair
/// is an edge, edges are partitioned into classes, each class xi admits at
/// most b_xi edges in a feasible matching.
class MatchingInstance {
 public:
  MatchingInstance(int agents, int incentives, std::vector<int> class_of,
                   std::vector<int> capacities, std::vector<double> weights);

  /// Convenience constructor: all edges share one class of the given capacity.
  static MatchingInstance single_class(int agents, int incentives,
                                       std::vector<double> weights,
                                       int capacity);

  int agents() const { return agents_; }
  int incentives() const { return incentives_; }
  int num_edges() const { return agents_ * incentives_; }
  int num_classes() const { return static_cast<int>(capacities_.size()); }

  int edge_index(Edge e) const { return e.agent * incentives_ + e.incentive; }
  Edge edge_at(int idx) const { return {idx / incentives_, idx % incentives_}; }

  int class_of(Edge e) const { return class_of_[edge_index(e)]; }
  int capacity(int cls) const { return capacities_[cls]; }
  double weight(Edge e) const { return weights_[edge_index(e)]; }
  const std::vector<double>& weights() const { return weights_; }

  /// Same structure (P, C, b), different weights.
  MatchingInstance with_weights(std::vector<double> weights) const;

  bool same_structure(const MatchingInstance& other) const;

  std::string to_json_string() const;
  static MatchingInstance from_json_string(const std::string& text);

 private:
  int agents_;
  int incentives_;
  std::vector<int> class_of_;    // row-major over edges
  std::vector<int> capacities_;  // per class
  std::vector<double> weights_;  // row-major over edges
};

/// A feasible solution: each agent/incentive at most once, class capacities
/// respected. Edges are kept in the order the producing algorithm emitted
/// them (selection order for the greedy algorithm).
struct Matching {
  std::vector<Edge> edges;

  double total_weight(const MatchingInstance& inst) const;
  bool contains(Edge e) const;
  /// Set equality, ignoring edge order.
  bool same_edges(const Matching& other) const;
};

bool is_feasible(const MatchingInstance& inst, const Matching& m);

/// Hierarchical decomposition of the edge set around the greedy matching.
/// marginal_sets[j] holds the edges that first become infeasible when the
/// (j+1)-th greedy edge is added; together they partition P minus the
/// greedy matching.
struct InfeasibilityDecomposition {
  std::vector<Edge> greedy_edges;               // nonincreasing weight
  std::vector<std::vector<Edge>> marginal_sets;  // L_1..L_m, aligned with greedy_edges
};

/// Iteratively takes the maximum-weight remaining edge; on add, removes the
/// edges sharing its agent or incentive; a saturated class removes only the
/// edge itself. Ties break by lexicographic (agent, incentive) order.
/// 1/3-approximation of the optimum.
Matching greedy_match(const MatchingInstance& inst);

/// Exhaustive branch-and-bound oracle for tests and audits. Throws if more
/// than max_edges positive-weight edges remain after pruning.
Matching exact_match(const MatchingInstance& inst, std::size_t max_edges = 20);

/// Maximum-weight bipartite matching, ignoring classes. Requires every class
/// capacity to be non-binding (>= min(agents, incentives)); throws otherwise.
Matching hungarian_match(const MatchingInstance& inst);

InfeasibilityDecomposition decompose(const MatchingInstance& inst);

/// Witness for the greedy local-ordering dichotomy: when two instances that
/// differ only in weights produce different greedy matchings, either an
/// inversion inside the first greedy matching (an inversion) or a marginal-set edge
/// outranking its greedy anchor (an overtake) must be observable.
struct DivergenceWitness {
  enum class Kind { identical, inversion, overtake };
  Kind kind = Kind::identical;
  // inversion: first = g*_j, second = g*_j' (j < j'), second selected under w~.
  // overtake: first = g*_j, second = the L_j edge selected under w~.
  Edge first{};
  Edge second{};
};

DivergenceWitness check_divergence_witness(const MatchingInstance& inst_w,
                          const MatchingInstance& inst_w2);

/// Disjoint feasible matchings that jointly play every edge exactly once.
/// Square instances with non-binding capacities decompose into exactly m
/// rotations; otherwise a greedy cover is built (at most m^2 matchings).
/// Throws if some class with edges has capacity zero.
std::vector<Matching> initial_cover(const MatchingInstance& inst);

}  // namespace geb

#pragma once

#include "pushsum/schedules.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace pushsum {

using NodeId = int;

/// Directed edge from -> to: `to` receives from `from`.
struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed graph on nodes 0..n-1. Every node always carries a self-loop,
/// so out_degree(j) >= 1 and counts j itself.
class DiGraph {
 public:
  DiGraph(int n, const std::vector<Edge>& edges);

  /// Graph with self-loops only.
  static DiGraph isolated(int n) { return DiGraph(n, {}); }
  static DiGraph complete(int n);

  int n() const { return n_; }
  int out_degree(NodeId j) const { return static_cast<int>(out_[j].size()); }
  /// Out-neighbors of j in increasing order, including j.
  const std::vector<NodeId>& out_neighbors(NodeId j) const { return out_[j]; }
  /// In-neighbors of i in increasing order, including i.
  const std::vector<NodeId>& in_neighbors(NodeId i) const { return in_[i]; }
  bool has_edge(NodeId from, NodeId to) const;
  /// Sorted edge list including self-loops.
  std::vector<Edge> edges() const;

  friend bool operator==(const DiGraph& a, const DiGraph& b) { return a.n_ == b.n_ && a.out_ == b.out_; }

 private:
  int n_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<NodeId>> in_;
};

/// Edge-set union of several graphs on the same node set.
DiGraph graph_union(const std::vector<const DiGraph*>& graphs);

bool is_strongly_connected(const DiGraph& g);

/// Weight 1/d_j that node j sends to each out-neighbor (including itself).
std::vector<std::pair<NodeId, double>> mixing_weights(const DiGraph& g, NodeId j);

/// Dense n x n matrix with A(i, j) = 1/d_j for every edge j -> i; column-stochastic.
Eigen::MatrixXd mixing_matrix(const DiGraph& g);

/// s(t) = t mod k over the graph list.
struct CyclicSelector {};

/// Each round is active with probability `activity`; an active round uses a
/// graph drawn uniformly from the list, an idle round uses self-loops only.
/// Draws come from a counter-based hash of (seed, t), so any round can be
/// evaluated independently of the others.
struct SeededRandomSelector {
  double activity = 1.0;
  std::uint64_t seed = 0;
};

using Selector = std::variant<CyclicSelector, SeededRandomSelector>;

/// Time-varying communication graph G(s(t)).
class GraphSchedule {
 public:
  GraphSchedule(std::vector<DiGraph> graphs, Selector selector, std::optional<int> claimed_B = {});

  int n() const { return graphs_.front().n(); }
  const std::vector<DiGraph>& graphs() const { return graphs_; }
  const Selector& selector() const { return selector_; }
  std::optional<int> claimed_B() const { return claimed_B_; }

  /// Index into graphs() used at round t, or nullopt for an idle round.
  std::optional<std::size_t> select(Round t) const;
  const DiGraph& at(Round t) const;
  /// Period of s(t) when it is periodic.
  std::optional<Round> period() const;

 private:
  std::vector<DiGraph> graphs_;
  Selector selector_;
  std::optional<int> claimed_B_;
  DiGraph idle_;
};

/// Union of the graphs used at rounds t, ..., t+B-1.
DiGraph union_graph(const GraphSchedule& s, Round t, int B);

/// True iff every window [t, t+B) with t in [0, horizon-B] has a strongly
/// connected union. For a periodic selector only one period of window starts
/// is examined, which is exact.
bool verify_B(const GraphSchedule& s, int B, Round horizon);

/// Smallest B <= max_B for which verify_B holds, if any.
std::optional<int> smallest_B(const GraphSchedule& s, int max_B, Round horizon);

}  // namespace pushsum

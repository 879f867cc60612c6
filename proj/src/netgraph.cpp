#include "pushsum/netgraph.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

namespace pushsum {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::vector<bool> reachable(const DiGraph& g, bool forward) {
  std::vector<bool> seen(g.n(), false);
  std::vector<NodeId> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    const auto& next = forward ? g.out_neighbors(v) : g.in_neighbors(v);
    for (NodeId w : next) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

DiGraph::DiGraph(int n, const std::vector<Edge>& edges) : n_(n), out_(n), in_(n) {
  if (n < 1) throw std::invalid_argument("graph needs at least one node");
  for (NodeId v = 0; v < n; ++v) {
    out_[v].push_back(v);
    in_[v].push_back(v);
  }
  for (const auto& e : edges) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      throw std::invalid_argument(fmt::format("edge {}->{} outside node range [0, {})", e.from, e.to, n));
    }
    out_[e.from].push_back(e.to);
    in_[e.to].push_back(e.from);
  }
  for (auto* lists : {&out_, &in_}) {
    for (auto& l : *lists) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
  }
}

DiGraph DiGraph::complete(int n) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j)
      if (i != j) edges.push_back({i, j});
  return DiGraph(n, edges);
}

bool DiGraph::has_edge(NodeId from, NodeId to) const {
  const auto& l = out_[from];
  return std::binary_search(l.begin(), l.end(), to);
}

std::vector<Edge> DiGraph::edges() const {
  std::vector<Edge> out;
  for (NodeId j = 0; j < n_; ++j)
    for (NodeId i : out_[j]) out.push_back({j, i});
  return out;
}

DiGraph graph_union(const std::vector<const DiGraph*>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("union of zero graphs");
  const int n = graphs.front()->n();
  std::vector<Edge> edges;
  for (const DiGraph* g : graphs) {
    if (g->n() != n) throw std::invalid_argument("graph union over different node counts");
    const auto e = g->edges();
    edges.insert(edges.end(), e.begin(), e.end());
  }
  return DiGraph(n, edges);
}

bool is_strongly_connected(const DiGraph& g) {
  const auto fwd = reachable(g, true);
  const auto bwd = reachable(g, false);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

std::vector<std::pair<NodeId, double>> mixing_weights(const DiGraph& g, NodeId j) {
  if (j < 0 || j >= g.n()) throw std::out_of_range(fmt::format("node {} not in graph", j));
  const double w = 1.0 / g.out_degree(j);
  std::vector<std::pair<NodeId, double>> out;
  for (NodeId i : g.out_neighbors(j)) out.emplace_back(i, w);
  return out;
}

Eigen::MatrixXd mixing_matrix(const DiGraph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.n(), g.n());
  for (NodeId j = 0; j < g.n(); ++j)
    for (const auto& [i, w] : mixing_weights(g, j)) a(i, j) = w;
  return a;
}

GraphSchedule::GraphSchedule(std::vector<DiGraph> graphs, Selector selector, std::optional<int> claimed_B)
    : graphs_(std::move(graphs)),
      selector_(selector),
      claimed_B_(claimed_B),
      idle_(DiGraph::isolated(graphs_.empty() ? 1 : graphs_.front().n())) {
  if (graphs_.empty()) throw std::invalid_argument("graph schedule needs at least one graph");
  for (const auto& g : graphs_) {
    if (g.n() != graphs_.front().n()) {
      throw std::invalid_argument("all graphs of a schedule must share the node count");
    }
  }
  if (claimed_B_ && *claimed_B_ < 1) throw std::invalid_argument("claimed B must be positive");
  if (const auto* r = std::get_if<SeededRandomSelector>(&selector_)) {
    if (!(r->activity > 0.0 && r->activity <= 1.0)) {
      throw std::invalid_argument("seeded-random activity probability must lie in (0, 1]");
    }
  }
}

std::optional<std::size_t> GraphSchedule::select(Round t) const {
  if (std::holds_alternative<CyclicSelector>(selector_)) return t % graphs_.size();
  const auto& r = std::get<SeededRandomSelector>(selector_);
  const std::uint64_t h = splitmix64(r.seed ^ splitmix64(t));
  if (unit_interval(h) >= r.activity) return std::nullopt;
  return splitmix64(h) % graphs_.size();
}

const DiGraph& GraphSchedule::at(Round t) const {
  const auto idx = select(t);
  return idx ? graphs_[*idx] : idle_;
}

std::optional<Round> GraphSchedule::period() const {
  if (std::holds_alternative<CyclicSelector>(selector_)) return graphs_.size();
  return std::nullopt;
}

DiGraph union_graph(const GraphSchedule& s, Round t, int B) {
  if (B < 1) throw std::invalid_argument("window length B must be >= 1");
  std::vector<const DiGraph*> window;
  window.reserve(B);
  for (int k = 0; k < B; ++k) window.push_back(&s.at(t + k));
  return graph_union(window);
}

bool verify_B(const GraphSchedule& s, int B, Round horizon) {
  if (B < 1) throw std::invalid_argument("window length B must be >= 1");
  if (horizon < static_cast<Round>(B)) {
    throw std::invalid_argument(fmt::format("horizon {} shorter than window {}", horizon, B));
  }
  Round last_start = horizon - B;
  if (const auto p = s.period()) last_start = std::min(last_start, *p - 1);
  for (Round t = 0; t <= last_start; ++t) {
    if (!is_strongly_connected(union_graph(s, t, B))) return false;
  }
  return true;
}

std::optional<int> smallest_B(const GraphSchedule& s, int max_B, Round horizon) {
  for (int B = 1; B <= max_B && static_cast<Round>(B) <= horizon; ++B) {
    if (verify_B(s, B, horizon)) return B;
  }
  return std::nullopt;
}

}  // namespace pushsum

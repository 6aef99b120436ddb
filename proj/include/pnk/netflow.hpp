#pragma once

// Capacitated max-flow (Dinic: BFS level graph + blocking flow) and the
// network-flow relaxation of the load-shed problem built on top of it.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "pnk/grid.hpp"

namespace pnk {

struct FlowArc {
  int from = 0;
  int to = 0;
  double capacity = 0.0;
};

struct FlowGraph {
  int num_nodes = 0;
  int source = 0;  // super-source when built from a grid
  int sink = 0;    // super-sink when built from a grid
  std::vector<FlowArc> arcs;
  // Per grid line position: {from->to arc, to->from arc}, -1 when the line is out.
  std::vector<std::array<int, 2>> line_arcs;

  int add_arc(int from, int to, double capacity) {
    arcs.push_back({from, to, std::max(capacity, 0.0)});
    return static_cast<int>(arcs.size()) - 1;
  }
};

struct FlowResult {
  double value = 0.0;
  std::vector<double> arc_flow;
  // Nodes reachable from the source in the final residual graph; the arcs
  // leaving this set form a minimum cut.
  std::vector<char> source_side;
  double cut_capacity = 0.0;
};

namespace detail {

class Dinic {
 public:
  Dinic(const FlowGraph& g, double eps) : g_(g), eps_(eps), adj_(g.num_nodes), level_(g.num_nodes), it_(g.num_nodes) {
    res_.reserve(2 * g.arcs.size());
    for (std::size_t a = 0; a < g.arcs.size(); ++a) {
      const auto& arc = g.arcs[a];
      adj_[arc.from].push_back(static_cast<int>(res_.size()));
      res_.push_back({arc.to, arc.capacity});
      adj_[arc.to].push_back(static_cast<int>(res_.size()));
      res_.push_back({arc.from, 0.0});
    }
  }

  double run(int s, int t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (true) {
        double pushed = dfs(s, t, std::numeric_limits<double>::infinity());
        if (pushed <= eps_) break;
        flow += pushed;
      }
    }
    return flow;
  }

  double arc_flow(std::size_t a) const { return res_[2 * a + 1].cap; }

  std::vector<char> reachable(int s) const {
    std::vector<char> seen(g_.num_nodes, 0);
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int r : adj_[u])
        if (res_[r].cap > eps_ && !seen[res_[r].to]) {
          seen[res_[r].to] = 1;
          stack.push_back(res_[r].to);
        }
    }
    return seen;
  }

 private:
  struct Residual {
    int to;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int r : adj_[u])
        if (res_[r].cap > eps_ && level_[res_[r].to] < 0) {
          level_[res_[r].to] = level_[u] + 1;
          q.push(res_[r].to);
        }
    }
    return level_[t] >= 0;
  }

  double dfs(int u, int t, double limit) {
    if (u == t) return limit;
    for (int& i = it_[u]; i < static_cast<int>(adj_[u].size()); ++i) {
      int r = adj_[u][i];
      auto& e = res_[r];
      if (e.cap <= eps_ || level_[e.to] != level_[u] + 1) continue;
      double got = dfs(e.to, t, std::min(limit, e.cap));
      if (got > eps_) {
        e.cap -= got;
        res_[r ^ 1].cap += got;
        return got;
      }
    }
    return 0.0;
  }

  const FlowGraph& g_;
  double eps_;
  std::vector<std::vector<int>> adj_;
  std::vector<Residual> res_;
  std::vector<int> level_;
  std::vector<int> it_;
};

}  // namespace detail

/// Maximum s-t flow. Arcs are scanned in insertion order, so results are
/// reproducible for a fixed graph. Opposed arc pairs registered as grid lines
/// have their 2-cycles cancelled so at most one direction carries flow.
inline FlowResult max_flow(const FlowGraph& g, int s, int t) {
  if (s == t) throw UsageError("max_flow: source equals sink");
  double scale = 1.0;
  for (const auto& a : g.arcs) scale = std::max(scale, a.capacity);
  const double eps = 1e-13 * scale;

  detail::Dinic solver(g, eps);
  FlowResult out;
  solver.run(s, t);
  out.arc_flow.resize(g.arcs.size());
  for (std::size_t a = 0; a < g.arcs.size(); ++a) out.arc_flow[a] = solver.arc_flow(a);
  for (const auto& pair : g.line_arcs) {
    if (pair[0] < 0 || pair[1] < 0) continue;
    double common = std::min(out.arc_flow[pair[0]], out.arc_flow[pair[1]]);
    out.arc_flow[pair[0]] -= common;
    out.arc_flow[pair[1]] -= common;
  }
  out.source_side = solver.reachable(s);
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    const auto& arc = g.arcs[a];
    if (arc.from == s) out.value += out.arc_flow[a];
    if (arc.to == s) out.value -= out.arc_flow[a];
    if (out.source_side[arc.from] && !out.source_side[arc.to]) out.cut_capacity += arc.capacity;
  }
  return out;
}

/// Generation capacity available to the flow model at a bus. Negative demand
/// is a curtailable injection and adds to it.
inline double nf_supply(const Bus& b) { return std::max(b.pg_hi, 0.0) + std::max(-b.pd, 0.0); }

/// Flow network of the network-flow relaxation: super-source S feeds each
/// generator bus, each loaded bus drains to super-sink T, and every operational
/// line becomes two opposed arcs of capacity t.
inline FlowGraph build_nf_graph(const SubNetwork& sub) {
  const auto& net = sub.network();
  const int n = static_cast<int>(net.num_buses());
  FlowGraph g;
  g.num_nodes = n + 2;
  g.source = n;
  g.sink = n + 1;
  for (int i = 0; i < n; ++i) {
    const auto& b = net.bus(i);
    if (nf_supply(b) > 0.0) g.add_arc(g.source, i, nf_supply(b));
  }
  for (int i = 0; i < n; ++i)
    if (net.bus(i).pd > 0.0) g.add_arc(i, g.sink, net.bus(i).pd);

  std::vector<std::size_t> order(sub.operational().begin(), sub.operational().end());
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return net.line(a).id < net.line(b).id; });
  g.line_arcs.assign(net.num_lines(), {-1, -1});
  for (auto e : order) {
    const auto& l = net.line(e);
    const int u = static_cast<int>(net.bus_index(l.from_bus));
    const int v = static_cast<int>(net.bus_index(l.to_bus));
    g.line_arcs[e] = {g.add_arc(u, v, l.t), g.add_arc(v, u, l.t)};
  }
  return g;
}

/// Directed line flow from -> to implied by a flow result (negative when the
/// line carries power towards its from-bus).
inline double nf_line_flow(const FlowGraph& g, const FlowResult& fr, std::size_t line) {
  const auto& pair = g.line_arcs[line];
  if (pair[0] < 0) return 0.0;
  return fr.arc_flow[pair[0]] - fr.arc_flow[pair[1]];
}

/// Per-line cut coefficients max(|p_ij|, |p_ji|); zero on interdicted lines.
inline std::vector<double> nf_cut_coefficients(const FlowGraph& g, const FlowResult& fr, const SubNetwork& sub) {
  std::vector<double> alpha(sub.network().num_lines(), 0.0);
  for (auto e : sub.operational()) {
    const auto& pair = g.line_arcs[e];
    alpha[e] = std::max(fr.arc_flow[pair[0]], fr.arc_flow[pair[1]]);
  }
  return alpha;
}

}  // namespace pnk

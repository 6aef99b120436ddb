#pragma once

// Random instances shared by the unit tests and the acceptance runner.

#include <random>
#include <vector>

#include "pnk/conic.hpp"
#include "pnk/grid.hpp"
#include "pnk/netflow.hpp"
#include "support/dense_simplex.hpp"

namespace pnk::oracles {

struct DenseLp {
  std::vector<std::vector<double>> A;
  std::vector<double> b, c;

  ConeProblem cone() const {
    ConeBuilder B;
    const int n = static_cast<int>(c.size());
    const int x = B.add_nonneg(n);
    for (int j = 0; j < n; ++j) B.set_cost(x + j, c[j]);
    for (std::size_t i = 0; i < A.size(); ++i) {
      std::vector<std::pair<int, double>> row;
      for (int j = 0; j < n; ++j)
        if (A[i][j] != 0.0) row.emplace_back(x + j, A[i][j]);
      B.add_row(row, b[i]);
    }
    return B.build();
  }
};

/// Feasible and bounded by construction: b = A x0 with x0 >= 0 and
/// c = A'y + s with s >= 0.
inline DenseLp random_lp(std::mt19937_64& rng, int max_vars = 30) {
  std::uniform_int_distribution<int> nd(2, max_vars);
  const int n = nd(rng);
  std::uniform_int_distribution<int> md(1, std::max(1, n - 1));
  const int m = md(rng);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DenseLp lp;
  lp.A.assign(m, std::vector<double>(n));
  for (auto& row : lp.A)
    for (auto& v : row) v = u(rng) < 0.6 ? g(rng) : 0.0;
  std::vector<double> x0(n), y(m);
  for (auto& v : x0) v = u(rng) < 0.5 ? 0.0 : u(rng) * 3.0;
  for (auto& v : y) v = g(rng);
  lp.b.assign(m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) lp.b[i] += lp.A[i][j] * x0[j];
  lp.c.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    lp.c[j] = u(rng) < 0.5 ? 0.0 : u(rng) * 2.0;
    for (int i = 0; i < m; ++i) lp.c[j] += lp.A[i][j] * y[i];
  }
  return lp;
}

/// Random SOCP with strictly feasible primal and dual points.
inline ConeProblem random_socp(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4), dim(2, 6), rows(1, 8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  ConeProblem p;
  std::vector<double> x0, s0;
  const int n_lin = count(rng);
  p.cones.push_back({ConeKind::Nonneg, n_lin});
  for (int i = 0; i < n_lin; ++i) {
    x0.push_back(u(rng));
    s0.push_back(u(rng));
  }
  const int n_soc = count(rng);
  for (int q = 0; q < n_soc; ++q) {
    const int d = dim(rng);
    p.cones.push_back({ConeKind::SecondOrder, d});
    for (auto* v : {&x0, &s0}) {
      std::vector<double> tail(d - 1);
      double norm = 0.0;
      for (auto& t : tail) {
        t = g(rng);
        norm += t * t;
      }
      v->push_back(std::sqrt(norm) + u(rng));
      v->insert(v->end(), tail.begin(), tail.end());
    }
  }
  const int n = static_cast<int>(x0.size());
  const int m = std::min(rows(rng), n - 1);
  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) y[i] = g(rng);
  const Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), n);
  const Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(s0.data(), n);
  p.A = A.sparseView();
  p.b = A * x;
  p.c = A.transpose() * y + s;
  return p;
}

/// Random grid-like flow graph: super-source, super-sink, and symmetric line arcs.
struct RandomFlow {
  FlowGraph graph;
  int buses = 0;
};

inline RandomFlow random_flow(std::mt19937_64& rng, int max_buses = 50) {
  std::uniform_int_distribution<int> nb(2, max_buses);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomFlow out;
  const int n = nb(rng);
  out.buses = n;
  auto& g = out.graph;
  g.num_nodes = n + 2;
  g.source = n;
  g.sink = n + 1;
  for (int i = 0; i < n; ++i) {
    if (u(rng) < 0.3) g.add_arc(g.source, i, 2.0 * u(rng));
    if (u(rng) < 0.6) g.add_arc(i, g.sink, u(rng));
  }
  const int lines = n + static_cast<int>(u(rng) * n);
  for (int e = 0; e < lines; ++e) {
    const int a = static_cast<int>(u(rng) * n), b = static_cast<int>(u(rng) * n);
    if (a == b) continue;
    const double t = u(rng);
    g.line_arcs.push_back({g.add_arc(a, b, t), g.add_arc(b, a, t)});
  }
  return out;
}

/// Random connected grid with scattered loads and generators.
inline Network random_network(std::mt19937_64& rng, int max_buses = 50) {
  std::uniform_int_distribution<int> nb(2, max_buses);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = nb(rng);
  std::vector<Bus> buses(n);
  for (int i = 0; i < n; ++i) {
    buses[i].id = i + 1;
    if (u(rng) < 0.7) buses[i].pd = u(rng);
    if (u(rng) < 0.3) buses[i].pg_hi = 2.0 * u(rng);
  }
  std::vector<Line> lines;
  auto add = [&](int a, int b) {
    Line l;
    l.id = static_cast<int>(lines.size()) + 1;
    l.from_bus = a + 1;
    l.to_bus = b + 1;
    l.b = -5.0 - 10.0 * u(rng);
    l.t = 0.1 + 1.4 * u(rng);
    l.pr = 0.05 + 0.2 * u(rng);
    lines.push_back(l);
  };
  for (int i = 1; i < n; ++i) add(static_cast<int>(u(rng) * i), i);
  const int extra = static_cast<int>(u(rng) * n);
  for (int e = 0; e < extra; ++e) {
    const int a = static_cast<int>(u(rng) * n), b = static_cast<int>(u(rng) * n);
    if (a != b) add(a, b);
  }
  return Network(100.0, std::move(buses), std::move(lines));
}

/// Max-flow as an LP over arc flows: max net outflow of S subject to
/// conservation at every other node except T and 0 <= f <= capacity.
inline ConeProblem flow_lp(const FlowGraph& g) {
  ConeBuilder B;
  const int na = static_cast<int>(g.arcs.size());
  const int f = B.add_nonneg(na);
  const int slack = B.add_nonneg(na);
  std::vector<std::vector<std::pair<int, double>>> balance(g.num_nodes);
  for (int a = 0; a < na; ++a) {
    const auto& arc = g.arcs[a];
    B.add_row({{f + a, 1.0}, {slack + a, 1.0}}, arc.capacity);
    balance[arc.from].emplace_back(f + a, 1.0);
    balance[arc.to].emplace_back(f + a, -1.0);
    if (arc.from == g.source) B.set_cost(f + a, -1.0);
    if (arc.to == g.source) B.set_cost(f + a, 1.0);
  }
  for (int v = 0; v < g.num_nodes; ++v)
    if (v != g.source && v != g.sink && !balance[v].empty()) B.add_row(balance[v], 0.0);
  return B.build();
}

}  // namespace pnk::oracles

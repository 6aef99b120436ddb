#include <gtest/gtest.h>

#include <random>

#include "pnk/inner.hpp"
#include "pnk/io.hpp"
#include "support/dense_simplex.hpp"
#include "support/random_problems.hpp"

using namespace pnk;

namespace {

std::string data(const char* name) { return std::string(PNK_DATA_DIR) + "/" + name; }

void expect_valid_flow(const FlowGraph& g, const FlowResult& fr, int s, int t) {
  std::vector<double> net(g.num_nodes, 0.0);
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    EXPECT_GE(fr.arc_flow[a], -1e-12);
    EXPECT_LE(fr.arc_flow[a], g.arcs[a].capacity + 1e-12);
    net[g.arcs[a].from] -= fr.arc_flow[a];
    net[g.arcs[a].to] += fr.arc_flow[a];
  }
  for (int v = 0; v < g.num_nodes; ++v) {
    if (v != s && v != t) EXPECT_NEAR(net[v], 0.0, 1e-12);
  }
}

}  // namespace

TEST(MaxFlow, SingleArc) {
  FlowGraph g;
  g.num_nodes = 2;
  g.add_arc(0, 1, 5.0);
  const auto fr = max_flow(g, 0, 1);
  EXPECT_DOUBLE_EQ(fr.value, 5.0);
  EXPECT_DOUBLE_EQ(fr.cut_capacity, 5.0);
}

TEST(MaxFlow, Diamond) {
  // S=0, a=1, b=2, T=3.
  FlowGraph g;
  g.num_nodes = 4;
  g.add_arc(0, 1, 3);
  g.add_arc(0, 2, 2);
  g.add_arc(1, 3, 2);
  g.add_arc(2, 3, 3);
  g.add_arc(1, 2, 1);
  const auto fr = max_flow(g, 0, 3);
  EXPECT_DOUBLE_EQ(fr.value, 5.0);
  EXPECT_DOUBLE_EQ(fr.cut_capacity, 5.0);
  expect_valid_flow(g, fr, 0, 3);
}

TEST(MaxFlow, Disconnected) {
  FlowGraph g;
  g.num_nodes = 4;
  g.add_arc(0, 1, 4);
  g.add_arc(2, 3, 7);
  const auto fr = max_flow(g, 0, 3);
  EXPECT_DOUBLE_EQ(fr.value, 0.0);
  EXPECT_DOUBLE_EQ(fr.cut_capacity, 0.0);
  EXPECT_TRUE(fr.source_side[1]);
  EXPECT_FALSE(fr.source_side[2]);
}

TEST(MaxFlow, SourceEqualsSinkRejected) {
  FlowGraph g;
  g.num_nodes = 1;
  EXPECT_THROW(max_flow(g, 0, 0), UsageError);
}

TEST(MaxFlow, MatchesDenseSimplexOnRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = oracles::random_flow(rng, 12);
    const auto& g = inst.graph;
    const auto fr = max_flow(g, g.source, g.sink);
    expect_valid_flow(g, fr, g.source, g.sink);
    EXPECT_NEAR(fr.cut_capacity, fr.value, 1e-12);

    const auto lp = oracles::flow_lp(g);
    const Eigen::MatrixXd A(lp.A);
    std::vector<std::vector<double>> rows(A.rows(), std::vector<double>(A.cols()));
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j) rows[i][j] = A(i, j);
    const auto ref = oracles::dense_simplex(rows, {lp.b.data(), lp.b.data() + lp.b.size()},
                                            {lp.c.data(), lp.c.data() + lp.c.size()});
    ASSERT_EQ(ref.status, oracles::SimplexStatus::Optimal);
    EXPECT_NEAR(fr.value, -ref.objective, 1e-9);
  }
}

TEST(NfGraph, TwoBus) {
  const auto net = load_network(data("two_bus.json"));
  const auto sub = apply_scenario(net, make_scenario(net, {}));
  const auto g = build_nf_graph(sub);
  const auto fr = max_flow(g, g.source, g.sink);
  EXPECT_DOUBLE_EQ(fr.value, 1.0);
  EXPECT_DOUBLE_EQ(solve_inner(sub, Formulation::NF).z, 0.0);
  const auto alpha = nf_cut_coefficients(g, fr, sub);
  EXPECT_DOUBLE_EQ(alpha[0], 1.0);
  EXPECT_DOUBLE_EQ(nf_line_flow(g, fr, 0), 1.0);
}

TEST(NfGraph, TwoBusInterdicted) {
  const auto net = load_network(data("two_bus.json"));
  const auto sub = apply_scenario(net, make_scenario(net, {1}));
  const auto g = build_nf_graph(sub);
  const auto fr = max_flow(g, g.source, g.sink);
  EXPECT_DOUBLE_EQ(fr.value, 0.0);
  EXPECT_DOUBLE_EQ(solve_inner(sub, Formulation::NF).z, 1.0);
  EXPECT_DOUBLE_EQ(nf_cut_coefficients(g, fr, sub)[0], 0.0);
}

TEST(NfGraph, Ieee14ServesAllLoad) {
  const auto net = load_network(data("case14.m"));
  EXPECT_NEAR(solve_inner(apply_scenario(net, make_scenario(net, {})), Formulation::NF).z, 0.0, 1e-12);
}

TEST(NfGraph, DiamondGridCoefficientsAreLineFlows) {
  // Buses 1 (gen 5), 2, 3, 4 (load 5): lines 1-2 (3), 1-3 (2), 2-4 (2), 3-4 (3), 2-3 (1).
  std::vector<Bus> buses(4);
  for (int i = 0; i < 4; ++i) buses[i].id = i + 1;
  buses[0].pg_hi = 5.0;
  buses[3].pd = 5.0;
  std::vector<Line> lines;
  const int ends[5][2] = {{1, 2}, {1, 3}, {2, 4}, {3, 4}, {2, 3}};
  const double cap[5] = {3, 2, 2, 3, 1};
  for (int e = 0; e < 5; ++e) {
    Line l;
    l.id = e + 1;
    l.from_bus = ends[e][0];
    l.to_bus = ends[e][1];
    l.b = -10.0;
    l.t = cap[e];
    lines.push_back(l);
  }
  const Network net(100.0, buses, lines);
  const auto sub = apply_scenario(net, make_scenario(net, {}));
  const auto g = build_nf_graph(sub);
  const auto fr = max_flow(g, g.source, g.sink);
  EXPECT_DOUBLE_EQ(fr.value, 5.0);
  const auto alpha = nf_cut_coefficients(g, fr, sub);
  for (std::size_t e = 0; e < 5; ++e) {
    EXPECT_DOUBLE_EQ(alpha[e], std::abs(nf_line_flow(g, fr, e)));
    EXPECT_LE(alpha[e], cap[e]);
  }
  // Flows into bus 4 saturate both of its lines.
  EXPECT_DOUBLE_EQ(alpha[2] + alpha[3], 5.0);
}

TEST(NfCuts, ValidAgainstAllScenariosOnTriangle) {
  const auto net = load_network(data("triangle.json"));
  std::vector<std::pair<Scenario, double>> all;
  for (int a = 1; a <= 3; ++a) {
    const auto s = make_scenario(net, {a});
    all.emplace_back(s, solve_inner(apply_scenario(net, s), Formulation::NF).z);
  }
  for (const auto& [hat, zhat] : all) {
    const auto sub = apply_scenario(net, hat);
    const auto g = build_nf_graph(sub);
    const auto alpha = nf_cut_coefficients(g, max_flow(g, g.source, g.sink), sub);
    for (const auto& [s, z] : all) EXPECT_LE(z, zhat + alpha[net.line_index(s.interdicted[0])] + 1e-12);
  }
}

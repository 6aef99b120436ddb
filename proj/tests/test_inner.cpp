#include <gtest/gtest.h>

#include <numbers>

#include "pnk/inner.hpp"
#include "pnk/io.hpp"
#include "support/dense_simplex.hpp"

using namespace pnk;

namespace {

std::string data(const char* name) { return std::string(PNK_DATA_DIR) + "/" + name; }

Network case14() { return parse_probabilities(read_file(data("case14_prob.csv")), load_network(data("case14.m"))); }

InnerSolution solve(const Network& net, std::vector<int> ids, Formulation f) {
  return solve_inner(net, make_scenario(net, std::move(ids)), f);
}

// Triangle DC model written out by hand with bus 1 as the angle reference.
// Columns: pg, s_pg, l2, s_l2, l3, s_l3, th2+, th2-, th3+, th3-, then one slack
// per thermal inequality (six).
double triangle_dc_reference() {
  const double t[3] = {0.3, 1.0, 1.0};
  const int n = 16;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  auto row = [&](std::vector<std::pair<int, double>> terms, double rhs) {
    std::vector<double> r(n, 0.0);
    for (auto [j, v] : terms) r[j] += v;
    A.push_back(r);
    b.push_back(rhs);
  };
  row({{0, 1}, {1, 1}}, 1.0);
  row({{2, 1}, {3, 1}}, 1.0);
  row({{4, 1}, {5, 1}}, 1.0);
  // Flow i->j is 10 (theta_i - theta_j).
  // Bus 1: pg = p12 + p13 = -10 th2 - 10 th3.
  row({{0, 1}, {6, 10}, {7, -10}, {8, 10}, {9, -10}}, 0.0);
  // Bus 2: -(1 - l2) 0.5 = p21 + p23 = 10 th2 + 10 (th2 - th3).
  row({{2, 0.5}, {6, -20}, {7, 20}, {8, 10}, {9, -10}}, 0.5);
  // Bus 3: -(1 - l3) 0.5 = p31 + p32 = 10 th3 + 10 (th3 - th2).
  row({{4, 0.5}, {8, -20}, {9, 20}, {6, 10}, {7, -10}}, 0.5);
  // |p12| = |10 th2| <= t1, |p13| = |10 th3| <= t2, |p23| = |10 (th2 - th3)| <= t3.
  row({{6, 10}, {7, -10}, {10, 1}}, t[0]);
  row({{6, -10}, {7, 10}, {11, 1}}, t[0]);
  row({{8, 10}, {9, -10}, {12, 1}}, t[1]);
  row({{8, -10}, {9, 10}, {13, 1}}, t[1]);
  row({{6, 10}, {7, -10}, {8, -10}, {9, 10}, {14, 1}}, t[2]);
  row({{6, -10}, {7, 10}, {8, 10}, {9, -10}, {15, 1}}, t[2]);
  std::vector<double> c(n, 0.0);
  c[2] = 0.5;
  c[4] = 0.5;
  const auto r = oracles::dense_simplex(A, b, c);
  EXPECT_EQ(r.status, oracles::SimplexStatus::Optimal);
  return r.objective;
}

}  // namespace

TEST(InnerDc, TwoBusServesLoad) {
  const auto net = load_network(data("two_bus.json"));
  const auto sol = solve(net, {}, Formulation::DC);
  EXPECT_NEAR(sol.z, 0.0, 1e-7);
  EXPECT_NEAR(sol.p_from[0], 1.0, 1e-7);
}

TEST(InnerDc, TwoBusIsland) {
  const auto net = load_network(data("two_bus.json"));
  EXPECT_NEAR(solve(net, {1}, Formulation::DC).z, 1.0, 1e-7);
  EXPECT_DOUBLE_EQ(solve(net, {1}, Formulation::NF).z, 1.0);
}

TEST(InnerDc, TriangleMatchesReferenceAndExceedsNf) {
  const auto net = load_network(data("triangle.json"));
  const double ref = triangle_dc_reference();
  const auto dc = solve(net, {}, Formulation::DC);
  EXPECT_NEAR(dc.z, ref, 1e-7);
  const auto nf = solve(net, {}, Formulation::NF);
  EXPECT_NEAR(nf.z, 0.0, 1e-12);
  EXPECT_GT(dc.z, nf.z + 1e-3);
}

TEST(InnerDc, ThermalLimitsRespected) {
  const auto net = load_network(data("triangle.json"));
  const auto dc = solve(net, {}, Formulation::DC);
  for (std::size_t e = 0; e < net.num_lines(); ++e) {
    EXPECT_LE(std::abs(dc.p_from[e]), net.line(e).t + 1e-7);
    EXPECT_NEAR(dc.p_from[e], -dc.p_to[e], 1e-9);
  }
}

TEST(InnerSoc, TwoBusLossless) {
  const auto base = load_network(data("two_bus.json"));
  std::vector<Line> lines(base.lines().begin(), base.lines().end());
  lines[0].t = 5.0;
  const Network net(base.base_mva(), {base.buses().begin(), base.buses().end()}, lines);
  const auto sol = solve(net, {}, Formulation::SOC);
  EXPECT_NEAR(sol.z, 0.0, 1e-7);
  // Zero shedding leaves an optimal face, so only cone feasibility is fixed.
  const auto tight = soc_tightness(sol, net);
  ASSERT_EQ(tight.gap.size(), 1u);
  EXPECT_GE(tight.gap[0], -1e-7);
}

TEST(InnerSoc, ReactiveLossesBindThermalLimit) {
  // 1 pu of real power plus the reactive losses cannot fit under |S| <= 1.
  const auto net = load_network(data("two_bus.json"));
  const auto sol = solve(net, {}, Formulation::SOC);
  EXPECT_GT(sol.z, 1e-4);
  EXPECT_LT(sol.z, 1e-2);
}

TEST(InnerSoc, TwoBusIsland) {
  const auto net = load_network(data("two_bus.json"));
  const auto sol = solve(net, {1}, Formulation::SOC);
  EXPECT_NEAR(sol.z, 1.0, 1e-7);
  EXPECT_TRUE(soc_tightness(sol, net).lines.empty());
}

TEST(InnerSoc, ConeFeasibleOnIeee14) {
  const auto net = case14();
  const auto sol = solve(net, {1, 7}, Formulation::SOC);
  const auto tight = soc_tightness(sol, net);
  EXPECT_GE(tight.min, -1e-7);
  for (std::size_t e = 0; e < net.num_lines(); ++e)
    if (sol.active[e]) {
      EXPECT_LE(std::hypot(sol.p_from[e], sol.q_from[e]), net.line(e).t + 1e-6);
      EXPECT_LE(std::hypot(sol.p_to[e], sol.q_to[e]), net.line(e).t + 1e-6);
    }
}

TEST(InnerSoc, TightnessNeedsSoc) {
  const auto net = load_network(data("two_bus.json"));
  EXPECT_THROW(soc_tightness(solve(net, {}, Formulation::DC), net), UsageError);
}

TEST(Inner, Ieee14IntactShedsNothing) {
  const auto net = case14();
  for (auto f : {Formulation::NF, Formulation::DC, Formulation::SOC}) EXPECT_NEAR(solve(net, {}, f).z, 0.0, 1e-6);
}

TEST(Inner, NfRelaxesDcOnSingleOutages) {
  const auto net = case14();
  for (const auto& l : net.lines()) {
    const double nf = solve(net, {l.id}, Formulation::NF).z;
    const double dc = solve(net, {l.id}, Formulation::DC).z;
    EXPECT_LE(nf, dc + 1e-7) << "line " << l.id;
  }
}

TEST(Inner, ShedWithinBounds) {
  const auto net = case14();
  for (auto f : {Formulation::NF, Formulation::DC, Formulation::SOC}) {
    const auto sol = solve(net, {3, 10}, f);
    EXPECT_GE(sol.z, 0.0);
    EXPECT_LE(sol.z, net.total_demand());
    for (double l : sol.shed) {
      EXPECT_GE(l, 0.0);
      EXPECT_LE(l, 1.0);
    }
  }
}

TEST(Inner, Deterministic) {
  const auto net = case14();
  EXPECT_EQ(solve(net, {2, 5}, Formulation::SOC).z, solve(net, {2, 5}, Formulation::SOC).z);
}

TEST(CutCoefficients, ReadFromFlows) {
  const auto net = load_network(data("triangle.json"));
  const auto sub = apply_scenario(net, make_scenario(net, {}));
  InnerSolution sol;
  sol.z = 0.25;
  sol.p_from = {0.5, 0.3, -0.2};
  sol.p_to = {-0.5, -0.3, 0.2};
  const auto cut = cut_coefficients(sol, sub);
  EXPECT_DOUBLE_EQ(cut.z_hat, 0.25);
  EXPECT_EQ(cut.alpha, (std::vector<double>{0.5, 0.3, 0.2}));
}

TEST(CutCoefficients, InterdictedLinesAreZero) {
  const auto net = case14();
  for (auto f : {Formulation::NF, Formulation::DC, Formulation::SOC}) {
    const auto s = make_scenario(net, {4, 9});
    const auto sub = apply_scenario(net, s);
    const auto cut = cut_coefficients(solve_inner(sub, f), sub);
    EXPECT_EQ(cut.alpha[net.line_index(4)], 0.0);
    EXPECT_EQ(cut.alpha[net.line_index(9)], 0.0);
    for (double a : cut.alpha) EXPECT_GE(a, 0.0);
  }
}

TEST(CutCoefficients, TwoBusNf) {
  const auto net = load_network(data("two_bus.json"));
  const auto sub = apply_scenario(net, make_scenario(net, {}));
  EXPECT_DOUBLE_EQ(cut_coefficients(solve_inner(sub, Formulation::NF), sub).alpha[0], 1.0);
}

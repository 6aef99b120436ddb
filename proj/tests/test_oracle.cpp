#include <gtest/gtest.h>

#include <algorithm>

#include "pnk/io.hpp"
#include "pnk/oracle.hpp"

using namespace pnk;

namespace {

std::string data(const char* name) { return std::string(PNK_DATA_DIR) + "/" + name; }

Network case14() { return parse_probabilities(read_file(data("case14_prob.csv")), load_network(data("case14.m"))); }

}  // namespace

TEST(Binomial, Values) {
  EXPECT_EQ(binomial(20, 2), 190u);
  EXPECT_EQ(binomial(38, 4), 73815u);
  EXPECT_EQ(binomial(5, 0), 1u);
  EXPECT_EQ(binomial(3, 4), 0u);
  EXPECT_EQ(binomial(200, 100), UINT64_MAX);
}

TEST(Colex, UnrankAgreesWithSuccessor) {
  const std::size_t n = 9, k = 4;
  auto c = unrank_colex(0, k);
  EXPECT_EQ(c, (std::vector<std::size_t>{0, 1, 2, 3}));
  std::uint64_t rank = 0;
  do {
    EXPECT_EQ(unrank_colex(rank, k), c);
    ++rank;
  } while (next_colex(c, n));
  EXPECT_EQ(rank, binomial(n, k));
}

TEST(Colex, OrderIsColexicographic) {
  auto prev = unrank_colex(0, 3);
  for (std::uint64_t r = 1; r < binomial(7, 3); ++r) {
    auto cur = unrank_colex(r, 3);
    EXPECT_TRUE(std::lexicographical_compare(prev.rbegin(), prev.rend(), cur.rbegin(), cur.rend()));
    prev = cur;
  }
}

TEST(Enumerate, TriangleSingleOutages) {
  const auto net = load_network(data("triangle.json"));
  const auto t = enumerate(net, 1, Formulation::DC);
  ASSERT_EQ(t.total(), 3u);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(t.records[r].scenario.interdicted, (std::vector<int>{int(r) + 1}));
}

TEST(Enumerate, BestMaximisesObjective) {
  const auto net = case14();
  const auto t = enumerate(net, 2, Formulation::NF);
  ASSERT_EQ(t.total(), 190u);
  ASSERT_TRUE(t.best);
  for (const auto& r : t.records)
    if (r.z >= shed_floor(net)) EXPECT_LE(r.scenario.log_prob + std::log(r.z), t.best_objective() + 1e-12);
}

TEST(Enumerate, WorkerCountDoesNotMatter) {
  const auto net = case14();
  for (auto f : {Formulation::NF, Formulation::DC, Formulation::SOC}) {
    EnumerateOptions one, eight;
    eight.workers = 8;
    const auto a = enumerate(net, 2, f, one);
    const auto b = enumerate(net, 2, f, eight);
    ASSERT_EQ(a.total(), b.total());
    EXPECT_EQ(a.best, b.best);
    for (std::size_t r = 0; r < a.total(); ++r) {
      EXPECT_EQ(a.records[r].scenario, b.records[r].scenario);
      EXPECT_EQ(a.records[r].z, b.records[r].z);
    }
  }
}

TEST(Enumerate, TieBreakIsLexicographic) {
  // Generator bus 1 feeds buses 2 and 3 over two parallel lines each. Cutting
  // both lines of either pair sheds 0.5 pu with the same probability; {2,3}
  // precedes {1,4} in colex order but {1,4} is lexicographically smaller.
  std::vector<Bus> buses(3);
  for (int i = 0; i < 3; ++i) buses[i].id = i + 1;
  buses[0].pg_hi = 1.0;
  buses[1].pd = 0.5;
  buses[2].pd = 0.5;
  std::vector<Line> lines(4);
  const int to[4] = {2, 3, 3, 2};
  for (int e = 0; e < 4; ++e) {
    lines[e].id = e + 1;
    lines[e].from_bus = 1;
    lines[e].to_bus = to[e];
    lines[e].b = -10.0;
    lines[e].t = 1.0;
    lines[e].pr = 0.5;
  }
  const Network net(100.0, buses, lines);
  const auto t = enumerate(net, 2, Formulation::NF);
  ASSERT_TRUE(t.best);
  EXPECT_EQ(t.best_record().scenario.interdicted, (std::vector<int>{1, 4}));
  EXPECT_FALSE(enumerate(net, 1, Formulation::NF).best);
}

TEST(Enumerate, CapRefusesWithCount) {
  const auto net = case14();
  EnumerateOptions opt;
  opt.cap = 100;
  try {
    enumerate(net, 2, Formulation::NF, opt);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("190"), std::string::npos);
  }
}

TEST(Enumerate, CsvHeaderAndRows) {
  const auto net = load_network(data("triangle.json"));
  const auto csv = enumeration_csv(enumerate(net, 2, Formulation::NF));
  EXPECT_EQ(csv.rfind("scenario_lines;z_pu;log_prob;weighted_mw\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("\n1,2;"), std::string::npos);
}

TEST(CutAudit, NfCutsValidOnIeee14) {
  const auto net = case14();
  const auto t = enumerate(net, 2, Formulation::NF);
  std::vector<CutCoefficients> cuts;
  for (std::size_t r = 0; r < t.total(); r += 7) {
    const auto sub = apply_scenario(net, t.records[r].scenario);
    cuts.push_back(cut_coefficients(solve_inner(sub, Formulation::NF), sub));
  }
  const auto audit = audit_cuts(t, net, cuts);
  EXPECT_EQ(audit.checks, cuts.size() * t.total());
  EXPECT_TRUE(audit.all_valid()) << audit.violations << " violations, max " << audit.max_violation;
}

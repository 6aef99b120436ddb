#include <gtest/gtest.h>

#include "pnk/io.hpp"

using namespace pnk;

namespace {

constexpr const char* kTwoBus = R"(
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0 0 0 1 1 0 138 1 1.05 0.95;
  2 1 100 0 0 0 1 1 0 138 1 1.05 0.95;
];
mpc.gen = [
  1 0 0 50 -50 1 100 1 100 0;
];
mpc.branch = [
  1 2 0 0.1 0 100 100 100 0 0 1 -360 360;
];
)";

std::string data(const char* name) { return std::string(PNK_DATA_DIR) + "/" + name; }

}  // namespace

TEST(ParseMatpower, TwoBusPerUnit) {
  const auto net = parse_matpower(kTwoBus);
  ASSERT_EQ(net.num_lines(), 1u);
  const auto& l = net.line(0);
  EXPECT_DOUBLE_EQ(l.g, 0.0);
  EXPECT_DOUBLE_EQ(l.b, -10.0);
  EXPECT_DOUBLE_EQ(l.t, 1.0);
  EXPECT_DOUBLE_EQ(net.bus(net.bus_index(2)).pd, 1.0);
  EXPECT_DOUBLE_EQ(net.bus(net.bus_index(1)).pg_hi, 1.0);
}

TEST(ParseMatpower, Ieee14Counts) {
  const auto net = load_network(data("case14.m"));
  EXPECT_EQ(net.num_buses(), 14u);
  EXPECT_EQ(net.num_lines(), 20u);
}

TEST(ParseMatpower, UnknownBusIsReferenceError) {
  std::string text = kTwoBus;
  text.replace(text.find("  1 2 0 0.1"), 5, "  99 2");
  EXPECT_THROW(parse_matpower(text), ReferenceError);
}

TEST(ParseMatpower, MalformedRowReportsLine) {
  std::string text = kTwoBus;
  text.replace(text.find("1 2 0 0.1"), 9, "1 2 zz 0.1");
  try {
    parse_matpower(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.line, 0);
  }
}

TEST(ParseMatpower, AdmittanceIdentity) {
  std::vector<std::string> warnings;
  const auto net = load_network(data("case14.m"), &warnings);
  EXPECT_FALSE(warnings.empty());
  for (const auto& l : net.lines()) EXPECT_GT(l.g * l.g + l.b * l.b, 0.0);
  const auto [g, b] = series_admittance(0.01, 0.1);
  EXPECT_NEAR(g, 0.01 / 0.0101, 1e-12);
  EXPECT_NEAR(b, -0.1 / 0.0101, 1e-12);
}

TEST(ParseProbabilities, SetsValue) {
  const auto net = parse_probabilities("from_bus,to_bus,circuit,probability\n1,2,1,0.35\n", parse_matpower(kTwoBus));
  EXPECT_DOUBLE_EQ(net.line(0).pr, 0.35);
}

TEST(ParseProbabilities, ReversedOrientationAccepted) {
  const auto net = parse_probabilities("from_bus,to_bus,circuit,probability\n2,1,1,0.2\n", parse_matpower(kTwoBus));
  EXPECT_DOUBLE_EQ(net.line(0).pr, 0.2);
}

TEST(ParseProbabilities, OutOfRangeIsDomainError) {
  const auto net = parse_matpower(kTwoBus);
  EXPECT_THROW(parse_probabilities("from_bus,to_bus,circuit,probability\n1,2,1,1.5\n", net), DomainError);
  EXPECT_THROW(parse_probabilities("from_bus,to_bus,circuit,probability\n1,2,1,0\n", net), DomainError);
}

TEST(ParseProbabilities, MissingLineNamed) {
  const auto net = load_network(data("case14.m"));
  auto text = read_file(data("case14_prob.csv"));
  text.erase(text.rfind("13,14"));
  try {
    parse_probabilities(text, net);
    FAIL();
  } catch (const ReferenceError& e) {
    EXPECT_NE(std::string(e.what()).find("13-14"), std::string::npos);
  }
}

TEST(ParseProbabilities, DuplicateRowRejected) {
  EXPECT_THROW(parse_probabilities("from_bus,to_bus,circuit,probability\n1,2,1,0.3\n1,2,1,0.3\n",
                                   parse_matpower(kTwoBus)),
               ParseError);
}

TEST(ApplyScenario, TwoBusInterdicted) {
  const auto net = load_network(data("two_bus.json"));
  const auto sub = apply_scenario(net, make_scenario(net, {1}));
  EXPECT_TRUE(sub.operational().empty());
}

TEST(ApplyScenario, EmptyScenarioKeepsAll) {
  const auto net = load_network(data("case14.m"));
  const auto sub = apply_scenario(net, make_scenario(net, {}));
  EXPECT_EQ(sub.operational().size(), net.num_lines());
}

TEST(ApplyScenario, TriangleDropsOneLine) {
  const auto net = load_network(data("triangle.json"));
  const auto sub = apply_scenario(net, make_scenario(net, {1}));
  ASSERT_EQ(sub.operational().size(), 2u);
  EXPECT_EQ(net.line(sub.operational()[0]).id, 2);
  EXPECT_EQ(net.line(sub.operational()[1]).id, 3);
  EXPECT_EQ(net.num_lines(), 3u);
}

TEST(ApplyScenario, UnknownLineIsReferenceError) {
  const auto net = load_network(data("triangle.json"));
  EXPECT_THROW(make_scenario(net, {7}), ReferenceError);
}

TEST(Scenario, LogProbability) {
  const auto net = load_network(data("triangle.json"));
  const auto s = make_scenario(net, {3, 1});
  EXPECT_EQ(s.interdicted, (std::vector<int>{1, 3}));
  EXPECT_NEAR(s.log_prob, std::log(0.1) + std::log(0.3), 1e-15);
}

TEST(NetworkJson, RoundTrip) {
  const auto net = parse_probabilities(read_file(data("case14_prob.csv")), load_network(data("case14.m")));
  const auto back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
  ASSERT_EQ(back.num_lines(), net.num_lines());
  for (std::size_t i = 0; i < net.num_buses(); ++i) EXPECT_EQ(back.bus(i), net.bus(i));
  for (std::size_t e = 0; e < net.num_lines(); ++e) EXPECT_EQ(back.line(e), net.line(e));
}

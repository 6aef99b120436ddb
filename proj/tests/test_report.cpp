#include <gtest/gtest.h>

#include "pnk/io.hpp"
#include "pnk/report.hpp"

using namespace pnk;

namespace {

std::string data(const char* name) { return std::string(PNK_DATA_DIR) + "/" + name; }

}  // namespace

TEST(Report, RoundTripSolved) {
  const auto net = parse_probabilities(read_file(data("case14_prob.csv")), load_network(data("case14.m")));
  auto rep = cutting_plane(net, 2, Formulation::SOC);
  rep.case_name = "case14";
  rep.seed = 99;
  const auto j = report_to_json(rep);
  for (const char* key : {"case", "k", "formulation", "epsilon", "status", "best_scenario", "z_pu", "log_prob",
                          "weighted_mw", "upper_bound", "gap", "iterations", "wall_seconds", "trace", "flags", "seed"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["prng"], "splitmix64");
  EXPECT_EQ(report_from_json(nlohmann::json::parse(j.dump())), rep);
}

TEST(Report, RoundTripWithoutIncumbent) {
  SolveReport rep;
  rep.case_name = "empty";
  rep.k = 1;
  rep.trace.push_back({1, {4}, 0.0, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()});
  const auto j = report_to_json(rep);
  EXPECT_TRUE(j["log_prob"].is_null());
  EXPECT_TRUE(j["upper_bound"].is_null());
  EXPECT_EQ(report_from_json(nlohmann::json::parse(j.dump())), rep);
}

TEST(Report, MalformedIsParseError) {
  EXPECT_THROW(report_from_json(nlohmann::json::parse("{\"case\": 3}")), ParseError);
}

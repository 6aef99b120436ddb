#pragma once

// JSON form of SolveReport. Infinite values are written as null. Recorded
// cuts are not part of the document.

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "pnk/master.hpp"
#include "pnk/probgen.hpp"

namespace pnk {

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double number_or(const nlohmann::json& j, const char* key, double if_null) {
  const auto& v = j.at(key);
  return v.is_null() ? if_null : v.get<double>();
}

}  // namespace detail

inline Termination parse_termination(std::string_view s) {
  if (s == "converged") return Termination::Converged;
  if (s == "time-limit") return Termination::TimeLimit;
  if (s == "exhausted") return Termination::Exhausted;
  throw ParseError("unknown status '" + std::string(s) + "'", 0);
}

inline nlohmann::json report_to_json(const SolveReport& r) {
  using detail::finite_or_null;
  nlohmann::json j;
  j["case"] = r.case_name;
  j["k"] = r.k;
  j["formulation"] = to_string(r.formulation);
  j["epsilon"] = r.epsilon;
  j["status"] = to_string(r.status);
  j["best_scenario"] = r.best_scenario;
  j["z_pu"] = r.z_pu;
  j["log_prob"] = finite_or_null(r.log_prob);
  j["f_best"] = finite_or_null(r.f_best);
  j["weighted_mw"] = r.weighted_mw;
  j["upper_bound"] = finite_or_null(r.upper_bound);
  j["gap"] = finite_or_null(r.gap);
  j["iterations"] = r.iterations;
  j["wall_seconds"] = r.wall_seconds;
  auto& trace = j["trace"] = nlohmann::json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"iter", t.iter},
                     {"scenario", t.scenario},
                     {"z_pu", t.z_pu},
                     {"f_lb", finite_or_null(t.f_lb)},
                     {"f_ub", finite_or_null(t.f_ub)}});
  j["flags"] = {{"respect_pg_min", r.flags.respect_pg_min},
                {"dc_angle_limits", r.flags.dc_angle_limits},
                {"bound_from_z", r.flags.bound_from_z}};
  j["seed"] = r.seed;
  j["prng"] = SplitMix64::name;
  j["heuristic"] = r.heuristic;
  j["base_mva"] = r.base_mva;
  return j;
}

inline SolveReport report_from_json(const nlohmann::json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  using detail::number_or;
  try {
    SolveReport r;
    r.case_name = j.at("case").get<std::string>();
    r.k = j.at("k").get<int>();
    r.formulation = parse_formulation(j.at("formulation").get<std::string>());
    r.epsilon = j.at("epsilon").get<double>();
    r.status = parse_termination(j.at("status").get<std::string>());
    r.best_scenario = j.at("best_scenario").get<std::vector<int>>();
    r.z_pu = j.at("z_pu").get<double>();
    r.log_prob = number_or(j, "log_prob", -inf);
    r.f_best = j.contains("f_best") ? number_or(j, "f_best", -inf) : -inf;
    r.weighted_mw = j.at("weighted_mw").get<double>();
    r.upper_bound = number_or(j, "upper_bound", inf);
    r.gap = number_or(j, "gap", inf);
    r.iterations = j.at("iterations").get<int>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& t : j.at("trace"))
      r.trace.push_back({t.at("iter").get<int>(), t.at("scenario").get<std::vector<int>>(), t.at("z_pu").get<double>(),
                         number_or(t, "f_lb", -inf), number_or(t, "f_ub", inf)});
    const auto& f = j.at("flags");
    r.flags = {f.at("respect_pg_min").get<bool>(), f.at("dc_angle_limits").get<bool>(),
               f.at("bound_from_z").get<bool>()};
    r.seed = j.at("seed").get<std::uint64_t>();
    r.heuristic = j.value("heuristic", r.formulation != Formulation::NF);
    r.base_mva = j.value("base_mva", 100.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), 0);
  }
}

}  // namespace pnk

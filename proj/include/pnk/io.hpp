#pragma once

// Readers and writers for network data: the Matpower case subset, the
// per-line probability CSV, and the native JSON network format.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>
#include "pnk/grid.hpp"

namespace pnk {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::optional<double> to_double(std::string_view tok) {
  tok = trim(tok);
  if (tok.empty()) return std::nullopt;
  if (tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    // from_chars rejects "Inf"/"NaN" spellings Matpower writes; fall back to strtod.
    std::string tmp(tok);
    char* end = nullptr;
    v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  }
  return v;
}

struct Row {
  std::vector<double> values;
  int line_no = 0;
};

// Locate `mpc.<name> = [ ... ];` and return its numeric rows.
inline std::optional<std::vector<Row>> matpower_table(std::string_view text, std::string_view name) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  bool inside = false;
  std::vector<Row> rows;
  const std::string key = "mpc." + std::string(name);
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
    if (!inside) {
      auto pos = line.find(key);
      if (pos == std::string_view::npos) continue;
      auto rest = trim(line.substr(pos + key.size()));
      if (rest.empty() || rest.front() != '=') continue;  // e.g. mpc.bus_name
      rest = trim(rest.substr(1));
      if (rest.empty() || rest.front() != '[')
        throw ParseError("expected '[' after " + key + " =", line_no);
      inside = true;
      line = rest.substr(1);
    }
    bool done = false;
    if (auto close = line.find(']'); close != std::string_view::npos) {
      line = line.substr(0, close);
      done = true;
    }
    // A physical line may hold several ';'-separated rows.
    std::size_t start = 0;
    while (start <= line.size()) {
      auto semi = line.find(';', start);
      auto chunk = trim(line.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start));
      if (!chunk.empty()) {
        Row row;
        row.line_no = line_no;
        std::size_t i = 0;
        while (i < chunk.size()) {
          while (i < chunk.size() && (chunk[i] == ' ' || chunk[i] == '\t' || chunk[i] == ',')) ++i;
          if (i >= chunk.size()) break;
          auto j = i;
          while (j < chunk.size() && chunk[j] != ' ' && chunk[j] != '\t' && chunk[j] != ',') ++j;
          auto v = to_double(chunk.substr(i, j - i));
          if (!v) throw ParseError("malformed number '" + std::string(chunk.substr(i, j - i)) + "' in " + key, line_no);
          row.values.push_back(*v);
          i = j;
        }
        rows.push_back(std::move(row));
      }
      if (semi == std::string_view::npos) break;
      start = semi + 1;
    }
    if (done) return rows;
  }
  if (inside) throw ParseError("unterminated table " + key, line_no);
  return std::nullopt;
}

inline std::optional<std::pair<double, int>> matpower_scalar(std::string_view text, std::string_view name) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  const std::string key = "mpc." + std::string(name);
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
    auto pos = line.find(key);
    if (pos == std::string_view::npos) continue;
    auto rest = trim(line.substr(pos + key.size()));
    if (rest.empty() || rest.front() != '=') continue;
    rest = trim(rest.substr(1));
    if (!rest.empty() && rest.back() == ';') rest.remove_suffix(1);
    auto v = to_double(rest);
    if (!v) throw ParseError("malformed value for " + key, line_no);
    return std::pair{*v, line_no};
  }
  return std::nullopt;
}

}  // namespace detail

/// Angle-difference limit used when a branch row leaves it unset or wider than 90 degrees.
inline constexpr double kDefaultThetaMax = std::numbers::pi / 3.0;

/// Parse the Matpower case subset (baseMVA, bus, gen, branch). Quantities are
/// converted to per-unit; generators are aggregated per bus; out-of-service
/// branches and generators are dropped. Modelling features the line model does
/// not carry (charging, taps, phase shifts, bus shunts) are ignored and
/// reported through `warnings` when given.
inline Network parse_matpower(std::string_view text, std::vector<std::string>* warnings = nullptr) {
  auto base = detail::matpower_scalar(text, "baseMVA");
  if (!base) throw ParseError("missing mpc.baseMVA", 0);
  const double base_mva = base->first;
  if (!(base_mva > 0.0)) throw ParseError("baseMVA must be positive", base->second);

  auto bus_rows = detail::matpower_table(text, "bus");
  auto gen_rows = detail::matpower_table(text, "gen");
  auto branch_rows = detail::matpower_table(text, "branch");
  if (!bus_rows) throw ParseError("missing mpc.bus table", 0);
  if (!gen_rows) throw ParseError("missing mpc.gen table", 0);
  if (!branch_rows) throw ParseError("missing mpc.branch table", 0);

  int n_shunt = 0, n_charging = 0, n_tap = 0, n_shift = 0;

  std::vector<Bus> buses;
  std::map<int, std::size_t> bus_pos;
  for (const auto& r : *bus_rows) {
    if (r.values.size() < 13) throw ParseError("bus row has fewer than 13 columns", r.line_no);
    Bus b;
    b.id = static_cast<int>(r.values[0]);
    b.pd = r.values[2] / base_mva;
    b.qd = r.values[3] / base_mva;
    if (r.values[4] != 0.0 || r.values[5] != 0.0) ++n_shunt;
    b.v_hi = r.values[11];
    b.v_lo = r.values[12];
    if (!bus_pos.emplace(b.id, buses.size()).second)
      throw ParseError("duplicate bus id " + std::to_string(b.id), r.line_no);
    buses.push_back(b);
  }

  for (const auto& r : *gen_rows) {
    if (r.values.size() < 10) throw ParseError("gen row has fewer than 10 columns", r.line_no);
    const int id = static_cast<int>(r.values[0]);
    auto it = bus_pos.find(id);
    if (it == bus_pos.end())
      throw ReferenceError("line " + std::to_string(r.line_no) + ": generator at unknown bus " + std::to_string(id));
    if (r.values[7] <= 0.0) continue;
    auto& b = buses[it->second];
    b.qg_hi += r.values[3] / base_mva;
    b.qg_lo += r.values[4] / base_mva;
    b.pg_hi += r.values[8] / base_mva;
    b.pg_lo += r.values[9] / base_mva;
  }

  double total_pd = 0.0;
  for (const auto& b : buses) total_pd += std::max(b.pd, 0.0);
  const double unlimited = total_pd > 0.0 ? total_pd : 1.0;

  std::vector<Line> lines;
  for (const auto& r : *branch_rows) {
    if (r.values.size() < 11) throw ParseError("branch row has fewer than 11 columns", r.line_no);
    const int f = static_cast<int>(r.values[0]);
    const int t = static_cast<int>(r.values[1]);
    for (int id : {f, t})
      if (!bus_pos.contains(id))
        throw ReferenceError("line " + std::to_string(r.line_no) + ": branch references unknown bus " +
                             std::to_string(id));
    if (r.values[10] <= 0.0) continue;
    Line l;
    l.id = static_cast<int>(lines.size()) + 1;
    l.from_bus = f;
    l.to_bus = t;
    try {
      std::tie(l.g, l.b) = series_admittance(r.values[2], r.values[3]);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), r.line_no);
    }
    l.t = r.values[5] > 0.0 ? r.values[5] / base_mva : unlimited;
    if (r.values[4] != 0.0) ++n_charging;
    if (r.values[8] != 0.0 && r.values[8] != 1.0) ++n_tap;
    if (r.values[9] != 0.0) ++n_shift;
    double lim_deg = 0.0;
    if (r.values.size() >= 13) lim_deg = std::min(std::abs(r.values[11]), std::abs(r.values[12]));
    l.theta_max = (lim_deg > 0.0 && lim_deg < 90.0) ? lim_deg * std::numbers::pi / 180.0 : kDefaultThetaMax;
    lines.push_back(l);
  }

  if (warnings) {
    auto note = [&](int n, const char* what) {
      if (n > 0) warnings->push_back(std::to_string(n) + " " + what + " ignored");
    };
    note(n_charging, "branch charging susceptance value(s)");
    note(n_tap, "off-nominal tap ratio(s)");
    note(n_shift, "phase shift angle(s)");
    note(n_shunt, "bus shunt(s)");
  }
  return Network(base_mva, std::move(buses), std::move(lines));
}

/// Attach failure probabilities from `from_bus,to_bus,circuit,probability` CSV.
/// Rows may name the bus pair in either orientation.
inline Network parse_probabilities(std::string_view text, const Network& net) {
  std::map<std::tuple<int, int, int>, std::size_t> by_key;
  for (std::size_t e = 0; e < net.num_lines(); ++e) {
    const auto& l = net.line(e);
    auto [a, b] = std::minmax(l.from_bus, l.to_bus);
    by_key[{a, b, l.circuit}] = e;
  }
  std::vector<double> pr(net.num_lines(), std::numeric_limits<double>::quiet_NaN());
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (!header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.remove_prefix(3);  // BOM
      if (line != "from_bus,to_bus,circuit,probability")
        throw ParseError("expected header from_bus,to_bus,circuit,probability", line_no);
      header = true;
      continue;
    }
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      cols.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols.size() != 4) throw ParseError("expected 4 columns", line_no);
    std::array<double, 4> v{};
    for (int c = 0; c < 4; ++c) {
      auto d = detail::to_double(cols[c]);
      if (!d) throw ParseError("malformed value '" + std::string(cols[c]) + "'", line_no);
      v[c] = *d;
    }
    const int fb = static_cast<int>(v[0]), tb = static_cast<int>(v[1]);
    const auto [a, b] = std::minmax(fb, tb);
    auto it = by_key.find({a, b, static_cast<int>(v[2])});
    if (it == by_key.end())
      throw ReferenceError("line " + std::to_string(line_no) + ": no line " + std::to_string(static_cast<int>(v[0])) +
                           "-" + std::to_string(static_cast<int>(v[1])) + " circuit " +
                           std::to_string(static_cast<int>(v[2])));
    if (!(v[3] > 0.0 && v[3] <= 1.0))
      throw DomainError("line " + std::to_string(line_no) + ": probability " + std::string(cols[3]) +
                        " outside (0,1]");
    if (!std::isnan(pr[it->second])) throw ParseError("duplicate row for the same line", line_no);
    pr[it->second] = v[3];
  }
  for (std::size_t e = 0; e < pr.size(); ++e)
    if (std::isnan(pr[e])) {
      const auto& l = net.line(e);
      throw ReferenceError("no probability for line " + std::to_string(l.id) + " (" + std::to_string(l.from_bus) +
                           "-" + std::to_string(l.to_bus) + " circuit " + std::to_string(l.circuit) + ")");
    }
  return net.with_probabilities(pr);
}

inline std::string write_probabilities(const Network& net, std::span<const double> pr) {
  std::ostringstream out;
  out.precision(17);
  out << "from_bus,to_bus,circuit,probability\n";
  for (std::size_t e = 0; e < net.num_lines(); ++e) {
    const auto& l = net.line(e);
    out << l.from_bus << ',' << l.to_bus << ',' << l.circuit << ',' << pr[e] << '\n';
  }
  return out.str();
}

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["base_mva"] = net.base_mva();
  auto& buses = j["buses"] = nlohmann::json::array();
  for (const auto& b : net.buses())
    buses.push_back({{"id", b.id}, {"v_lo", b.v_lo}, {"v_hi", b.v_hi}, {"pg_lo", b.pg_lo}, {"pg_hi", b.pg_hi},
                     {"qg_lo", b.qg_lo}, {"qg_hi", b.qg_hi}, {"pd", b.pd}, {"qd", b.qd}});
  auto& lines = j["lines"] = nlohmann::json::array();
  for (const auto& l : net.lines()) {
    nlohmann::json jl = {{"id", l.id}, {"from", l.from_bus}, {"to", l.to_bus}, {"g", l.g},
                         {"b", l.b},   {"t", l.t},          {"theta_max", l.theta_max}};
    jl["pr"] = l.has_probability() ? nlohmann::json(l.pr) : nlohmann::json(nullptr);
    lines.push_back(std::move(jl));
  }
  return j;
}

inline Network network_from_json(const nlohmann::json& j) {
  try {
    std::vector<Bus> buses;
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      b.v_lo = jb.at("v_lo").get<double>();
      b.v_hi = jb.at("v_hi").get<double>();
      b.pg_lo = jb.at("pg_lo").get<double>();
      b.pg_hi = jb.at("pg_hi").get<double>();
      b.qg_lo = jb.at("qg_lo").get<double>();
      b.qg_hi = jb.at("qg_hi").get<double>();
      b.pd = jb.at("pd").get<double>();
      b.qd = jb.at("qd").get<double>();
      buses.push_back(b);
    }
    std::vector<Line> lines;
    for (const auto& jl : j.at("lines")) {
      Line l;
      l.id = jl.at("id").get<int>();
      l.from_bus = jl.at("from").get<int>();
      l.to_bus = jl.at("to").get<int>();
      l.g = jl.at("g").get<double>();
      l.b = jl.at("b").get<double>();
      l.t = jl.at("t").get<double>();
      l.theta_max = jl.value("theta_max", kDefaultThetaMax);
      if (jl.contains("pr") && !jl["pr"].is_null()) l.pr = jl["pr"].get<double>();
      lines.push_back(l);
    }
    return Network(j.at("base_mva").get<double>(), std::move(buses), std::move(lines));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network JSON: ") + e.what(), 0);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Load a network by extension: `.json` is the native format, anything else is Matpower.
inline Network load_network(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  auto text = read_file(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return network_from_json(nlohmann::json::parse(text));
  return parse_matpower(text, warnings);
}

}  // namespace pnk

#pragma once

// Transmission network data model: buses, lines, N-k scenarios and the
// operational sub-network a scenario leaves behind. All electrical
// quantities are per-unit on the network's MVA base.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pnk {

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line_no)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what),
        line(line_no) {}
  int line;
};

struct ReferenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;
  double v_lo = 0.9;
  double v_hi = 1.1;
  double pg_lo = 0.0;
  double pg_hi = 0.0;
  double qg_lo = 0.0;
  double qg_hi = 0.0;
  double pd = 0.0;
  double qd = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double g = 0.0;
  double b = 0.0;
  double t = 0.0;
  double theta_max = std::numbers::pi / 3.0;
  // NaN until probability data has been attached.
  double pr = std::numeric_limits<double>::quiet_NaN();
  // 1-based index among lines joining the same (unordered) bus pair.
  int circuit = 1;

  bool has_probability() const { return !std::isnan(pr); }

  bool operator==(const Line& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return id == o.id && from_bus == o.from_bus && to_bus == o.to_bus && g == o.g && b == o.b &&
           t == o.t && theta_max == o.theta_max && same(pr, o.pr) && circuit == o.circuit;
  }
};

/// Series admittance y = 1/(r + jx) split into (g, b).
inline std::pair<double, double> series_admittance(double r, double x) {
  const double den = r * r + x * x;
  if (den <= 0.0) throw DomainError("branch has zero series impedance");
  return {r / den, -x / den};
}

class Network {
 public:
  Network() = default;
  Network(double base_mva, std::vector<Bus> buses, std::vector<Line> lines)
      : base_mva_(base_mva), buses_(std::move(buses)), lines_(std::move(lines)) {
    index();
  }

  double base_mva() const { return base_mva_; }
  std::span<const Bus> buses() const { return buses_; }
  std::span<const Line> lines() const { return lines_; }
  std::size_t num_buses() const { return buses_.size(); }
  std::size_t num_lines() const { return lines_.size(); }

  const Bus& bus(std::size_t idx) const { return buses_[idx]; }
  const Line& line(std::size_t idx) const { return lines_[idx]; }

  bool has_bus(int id) const { return bus_index_.contains(id); }
  std::size_t bus_index(int id) const {
    auto it = bus_index_.find(id);
    if (it == bus_index_.end()) throw ReferenceError("unknown bus " + std::to_string(id));
    return it->second;
  }
  bool has_line(int id) const { return line_index_.contains(id); }
  std::size_t line_index(int id) const {
    auto it = line_index_.find(id);
    if (it == line_index_.end()) throw ReferenceError("unknown line " + std::to_string(id));
    return it->second;
  }

  /// Sum of positive active demand (pu).
  double total_demand() const {
    double s = 0.0;
    for (const auto& b : buses_) s += std::max(b.pd, 0.0);
    return s;
  }

  bool has_probabilities() const {
    return std::all_of(lines_.begin(), lines_.end(), [](const Line& l) { return l.has_probability(); });
  }

  /// Copy with the given per-line failure probabilities (indexed by line position).
  Network with_probabilities(std::span<const double> pr) const {
    if (pr.size() != lines_.size()) throw UsageError("probability vector size does not match line count");
    Network out = *this;
    for (std::size_t e = 0; e < lines_.size(); ++e) {
      if (!(pr[e] > 0.0 && pr[e] <= 1.0))
        throw DomainError("probability of line " + std::to_string(lines_[e].id) + " outside (0,1]");
      out.lines_[e].pr = pr[e];
    }
    return out;
  }

  std::vector<double> probabilities() const {
    std::vector<double> pr;
    pr.reserve(lines_.size());
    for (const auto& l : lines_) pr.push_back(l.pr);
    return pr;
  }

  bool operator==(const Network& o) const {
    return base_mva_ == o.base_mva_ && buses_ == o.buses_ && lines_ == o.lines_;
  }

 private:
  void index() {
    if (!(base_mva_ > 0.0)) throw DomainError("base_mva must be positive");
    bus_index_.clear();
    line_index_.clear();
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      const auto& b = buses_[i];
      if (!bus_index_.emplace(b.id, i).second) throw DomainError("duplicate bus id " + std::to_string(b.id));
      if (!(b.v_lo > 0.0 && b.v_lo <= b.v_hi))
        throw DomainError("bus " + std::to_string(b.id) + " has invalid voltage bounds");
      if (b.pg_lo > b.pg_hi || b.qg_lo > b.qg_hi)
        throw DomainError("bus " + std::to_string(b.id) + " has inverted generation bounds");
    }
    std::map<std::pair<int, int>, int> circuits;
    for (std::size_t e = 0; e < lines_.size(); ++e) {
      auto& l = lines_[e];
      if (!line_index_.emplace(l.id, e).second) throw DomainError("duplicate line id " + std::to_string(l.id));
      if (!bus_index_.contains(l.from_bus) || !bus_index_.contains(l.to_bus))
        throw ReferenceError("line " + std::to_string(l.id) + " references unknown bus " +
                             std::to_string(bus_index_.contains(l.from_bus) ? l.to_bus : l.from_bus));
      if (!(l.t > 0.0)) throw DomainError("line " + std::to_string(l.id) + " has non-positive thermal limit");
      if (!(l.theta_max > 0.0 && l.theta_max < std::numbers::pi / 2))
        throw DomainError("line " + std::to_string(l.id) + " has angle limit outside (0, pi/2)");
      if (l.has_probability() && !(l.pr > 0.0 && l.pr <= 1.0))
        throw DomainError("line " + std::to_string(l.id) + " has probability outside (0,1]");
      if (l.g * l.g + l.b * l.b <= 0.0)
        throw DomainError("line " + std::to_string(l.id) + " has zero admittance");
      auto key = std::minmax(l.from_bus, l.to_bus);
      l.circuit = ++circuits[{key.first, key.second}];
    }
  }

  double base_mva_ = 100.0;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::unordered_map<int, std::size_t> bus_index_;
  std::unordered_map<int, std::size_t> line_index_;
};

/// A set of exactly k interdicted lines (by id, ascending) and its log-probability.
struct Scenario {
  std::vector<int> interdicted;
  double log_prob = 0.0;

  std::size_t k() const { return interdicted.size(); }
  bool operator==(const Scenario&) const = default;
};

/// Build a scenario from line ids; ids are sorted and checked against the network.
/// Lines without probability data contribute log(1) = 0.
inline Scenario make_scenario(const Network& net, std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw UsageError("scenario lists a line more than once");
  Scenario s;
  for (int id : ids) {
    const auto& l = net.line(net.line_index(id));
    if (l.has_probability()) s.log_prob += std::log(l.pr);
  }
  s.interdicted = std::move(ids);
  return s;
}

/// Scenario from line positions (0-based indices into Network::lines()).
inline Scenario scenario_from_indices(const Network& net, std::span<const std::size_t> idx) {
  std::vector<int> ids;
  ids.reserve(idx.size());
  for (auto e : idx) ids.push_back(net.line(e).id);
  return make_scenario(net, std::move(ids));
}

/// Operational view of a network under a scenario. Holds a reference to the
/// network, which must outlive it.
class SubNetwork {
 public:
  SubNetwork(const Network& net, std::vector<char> active) : net_(&net), active_(std::move(active)) {
    for (std::size_t e = 0; e < active_.size(); ++e)
      (active_[e] ? operational_ : interdicted_).push_back(e);
  }

  const Network& network() const { return *net_; }
  bool is_active(std::size_t line_idx) const { return active_[line_idx] != 0; }
  /// Operational lines (positions). Each one contributes a from-edge and a to-edge.
  std::span<const std::size_t> operational() const { return operational_; }
  std::span<const std::size_t> interdicted() const { return interdicted_; }

 private:
  const Network* net_;
  std::vector<char> active_;
  std::vector<std::size_t> operational_;
  std::vector<std::size_t> interdicted_;
};

inline SubNetwork apply_scenario(const Network& net, const Scenario& s) {
  std::vector<char> active(net.num_lines(), 1);
  for (int id : s.interdicted) active[net.line_index(id)] = 0;
  return SubNetwork(net, std::move(active));
}

}  // namespace pnk

#pragma once

// Defender problem for a fixed scenario: minimum active load shed under the
// network-flow, DC and SOC models, plus the per-line cut coefficients that
// bound the shed of every other scenario.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pnk/conic.hpp"
#include "pnk/grid.hpp"
#include "pnk/netflow.hpp"

namespace pnk {

enum class Formulation { NF, DC, SOC };

inline const char* to_string(Formulation f) {
  switch (f) {
    case Formulation::NF: return "nf";
    case Formulation::DC: return "dc";
    case Formulation::SOC: return "soc";
  }
  return "?";
}

inline Formulation parse_formulation(std::string_view s) {
  if (s == "nf" || s == "NF") return Formulation::NF;
  if (s == "dc" || s == "DC") return Formulation::DC;
  if (s == "soc" || s == "SOC") return Formulation::SOC;
  throw UsageError("unknown formulation '" + std::string(s) + "' (expected nf, dc or soc)");
}

struct InnerOptions {
  bool respect_pg_min = false;   // keep literal generator minimums
  bool dc_angle_limits = true;   // enforce |theta_i - theta_j| <= theta_max in DC
  ConeOptions cone;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InnerSolution {
  Formulation formulation = Formulation::NF;
  double z = 0.0;                 // active load shed (pu)
  std::vector<double> shed;       // l_i per bus
  std::vector<double> pg, qg;     // dispatch per bus
  std::vector<double> p_from, p_to;  // per line position; zero when interdicted
  std::vector<double> q_from, q_to;  // SOC only
  std::vector<double> w;             // SOC: W_ii per bus
  std::vector<double> w_re, w_im;    // SOC: W_ij per line
  std::vector<char> active;
  ConeStatus status = ConeStatus::Optimal;
  int iterations = 0;
};

struct CutCoefficients {
  double z_hat = 0.0;
  std::vector<double> alpha;  // per line position

  bool operator==(const CutCoefficients&) const = default;
};

/// A model quantity that is either a constant or offset + x[var].
struct Affine {
  int var = -1;
  double offset = 0.0;
  double sign = 1.0;

  double value(const Eigen::VectorXd& x) const { return offset + (var >= 0 ? sign * x[var] : 0.0); }
};

namespace detail {

// Variable ranging over [lo, hi] (either end may be infinite) as a shifted
// nonnegative variable, with a slack row when both ends are finite.
inline Affine bounded(ConeBuilder& B, double lo, double hi) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (lo > hi) throw DomainError("empty variable range");
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) return {-1, 0.5 * (lo + hi), 1.0};
  if (lo == -inf && hi == inf) return {B.add_free(), 0.0, 1.0};
  if (lo == -inf) return {B.add_nonneg(), hi, -1.0};
  const int v = B.add_nonneg();
  if (hi != inf) {
    const int slack = B.add_nonneg();
    B.add_row({{v, 1.0}, {slack, 1.0}}, hi - lo);
  }
  return {v, lo, 1.0};
}

// Accumulates sum(coef * affine) terms for one row, folding offsets into the rhs.
struct RowBuf {
  std::vector<std::pair<int, double>> terms;
  double rhs = 0.0;

  void add(const Affine& a, double coef) {
    rhs -= coef * a.offset;
    if (a.var >= 0) terms.emplace_back(a.var, coef * a.sign);
  }
  void add(int var, double coef) { terms.emplace_back(var, coef); }
  int emit(ConeBuilder& B) { return B.add_row(terms, rhs); }
};

struct BusBounds {
  double pg_lo, pg_hi, qg_lo, qg_hi, pd, qd;
};

inline BusBounds bus_bounds(const Bus& b, const InnerOptions& opt) {
  BusBounds r{};
  r.pd = std::max(b.pd, 0.0);
  r.qd = b.qd;
  r.pg_hi = b.pg_hi + std::max(-b.pd, 0.0);
  r.pg_lo = opt.respect_pg_min ? b.pg_lo : std::min(b.pg_lo, 0.0);
  r.qg_lo = opt.respect_pg_min ? b.qg_lo : std::min(b.qg_lo, 0.0);
  r.qg_hi = opt.respect_pg_min ? b.qg_hi : std::max(b.qg_hi, 0.0);
  return r;
}

}  // namespace detail

/// A ConeProblem together with the variable map needed to read a solution back.
struct InnerModel {
  Formulation formulation = Formulation::DC;
  ConeProblem problem;
  std::vector<Affine> pg, qg, shed, w;
  std::vector<Affine> p_from, p_to, q_from, q_to;
  std::vector<int> w_re2, w_im2;  // variables holding 2 Re W_ij, 2 Im W_ij
};

namespace detail {

// Shared body of the DC and NF linear programs; `coupled` adds p = -b (theta_i - theta_j).
inline InnerModel build_linear(const SubNetwork& sub, const InnerOptions& opt, bool coupled) {
  const auto& net = sub.network();
  const std::size_t nb = net.num_buses(), nl = net.num_lines();
  ConeBuilder B;
  InnerModel M;
  M.formulation = coupled ? Formulation::DC : Formulation::NF;
  M.pg.resize(nb);
  M.shed.resize(nb);
  M.p_from.resize(nl);
  M.p_to.resize(nl);
  std::vector<Affine> theta(nb);
  std::vector<RowBuf> balance(nb);

  for (std::size_t i = 0; i < nb; ++i) {
    auto bb = bus_bounds(net.bus(i), opt);
    if (!coupled) {
      bb.pg_lo = 0.0;
      bb.pg_hi = std::max(bb.pg_hi, 0.0);
    }
    M.pg[i] = bounded(B, bb.pg_lo, bb.pg_hi);
    balance[i].add(M.pg[i], 1.0);
    balance[i].rhs += bb.pd;
    if (bb.pd > 0.0) {
      M.shed[i] = bounded(B, 0.0, 1.0);
      B.set_cost(M.shed[i].var, bb.pd);
      balance[i].add(M.shed[i], bb.pd);
    }
  }
  if (coupled) {
    // One angle per island is pinned to zero; the rest are free.
    std::vector<int> parent(nb);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    std::vector<char> touched(nb, 0);
    for (auto e : sub.operational()) {
      const auto& l = net.line(e);
      const int i = static_cast<int>(net.bus_index(l.from_bus)), j = static_cast<int>(net.bus_index(l.to_bus));
      touched[i] = touched[j] = 1;
      const int a = root(i), b = root(j);
      parent[std::max(a, b)] = std::min(a, b);
    }
    for (std::size_t i = 0; i < nb; ++i)
      if (touched[i] && root(static_cast<int>(i)) != static_cast<int>(i)) theta[i] = {B.add_free(), 0.0, 1.0};
  }
  for (auto e : sub.operational()) {
    const auto& l = net.line(e);
    const auto i = net.bus_index(l.from_bus), j = net.bus_index(l.to_bus);
    double cap = l.t;
    const bool angle_box = coupled && opt.dc_angle_limits;
    if (angle_box && l.b != 0.0) cap = std::min(cap, std::abs(l.b) * l.theta_max);
    M.p_from[e] = bounded(B, -cap, cap);
    M.p_to[e] = {M.p_from[e].var, -M.p_from[e].offset, -M.p_from[e].sign};
    balance[i].add(M.p_from[e], -1.0);
    balance[j].add(M.p_from[e], 1.0);
    if (coupled) {
      RowBuf flow;
      flow.add(M.p_from[e], 1.0);
      flow.add(theta[i], l.b);
      flow.add(theta[j], -l.b);
      flow.emit(B);
      if (angle_box && l.b == 0.0) {
        RowBuf box;
        box.add(theta[i], 1.0);
        box.add(theta[j], -1.0);
        box.add(bounded(B, -l.theta_max, l.theta_max), -1.0);
        box.emit(B);
      }
    }
  }
  for (auto& row : balance) row.emit(B);
  M.problem = B.build();
  return M;
}

}  // namespace detail

/// B-theta linear program for the DC model.
inline InnerModel build_dc(const SubNetwork& sub, const InnerOptions& opt = {}) {
  return detail::build_linear(sub, opt, true);
}

/// The DC program without the flow-angle coupling: the network-flow model as an LP.
inline InnerModel build_nf_lp(const SubNetwork& sub, const InnerOptions& opt = {}) {
  return detail::build_linear(sub, opt, false);
}

/// Second-order cone relaxation of the AC model in the W variables.
inline InnerModel build_soc(const SubNetwork& sub, const InnerOptions& opt = {}) {
  using detail::RowBuf;
  const auto& net = sub.network();
  const std::size_t nb = net.num_buses(), nl = net.num_lines();
  ConeBuilder B;
  InnerModel M;
  M.formulation = Formulation::SOC;
  M.pg.resize(nb);
  M.qg.resize(nb);
  M.shed.resize(nb);
  M.w.resize(nb);
  M.p_from.resize(nl);
  M.p_to.resize(nl);
  M.q_from.resize(nl);
  M.q_to.resize(nl);
  M.w_re2.assign(nl, -1);
  M.w_im2.assign(nl, -1);
  std::vector<RowBuf> pbal(nb), qbal(nb);

  for (std::size_t i = 0; i < nb; ++i) {
    const auto& bus = net.bus(i);
    const auto bb = detail::bus_bounds(bus, opt);
    M.w[i] = detail::bounded(B, bus.v_lo * bus.v_lo, bus.v_hi * bus.v_hi);
    M.pg[i] = detail::bounded(B, bb.pg_lo, bb.pg_hi);
    M.qg[i] = detail::bounded(B, bb.qg_lo, bb.qg_hi);
    pbal[i].add(M.pg[i], 1.0);
    qbal[i].add(M.qg[i], 1.0);
    pbal[i].rhs += bb.pd;
    qbal[i].rhs += bb.qd;
    if (bb.pd > 0.0 || bb.qd != 0.0) {
      M.shed[i] = detail::bounded(B, 0.0, 1.0);
      B.set_cost(M.shed[i].var, bb.pd);
      pbal[i].add(M.shed[i], bb.pd);
      qbal[i].add(M.shed[i], bb.qd);
    }
  }

  for (auto e : sub.operational()) {
    const auto& l = net.line(e);
    const auto i = net.bus_index(l.from_bus), j = net.bus_index(l.to_bus);
    const double g = l.g, b = l.b;
    // (W_ii + W_jj, 2 Re W_ij, 2 Im W_ij, W_ii - W_jj) in the second-order cone.
    const int cw = B.add_soc(4);
    const int re2 = cw + 1, im2 = cw + 2;
    M.w_re2[e] = re2;
    M.w_im2[e] = im2;
    {
      RowBuf r;
      r.add(cw, 1.0);
      r.add(M.w[i], -1.0);
      r.add(M.w[j], -1.0);
      r.emit(B);
      RowBuf d;
      d.add(cw + 3, 1.0);
      d.add(M.w[i], -1.0);
      d.add(M.w[j], 1.0);
      d.emit(B);
    }
    // Thermal limits |S| <= t at both ends.
    const int tf = B.add_soc(3);
    const int tt = B.add_soc(3);
    B.add_row({{tf, 1.0}}, l.t);
    B.add_row({{tt, 1.0}}, l.t);
    M.p_from[e] = {tf + 1, 0.0, 1.0};
    M.q_from[e] = {tf + 2, 0.0, 1.0};
    M.p_to[e] = {tt + 1, 0.0, 1.0};
    M.q_to[e] = {tt + 2, 0.0, 1.0};
    // Flow definitions with R = re2/2, I = im2/2.
    {
      RowBuf r;
      r.add(tf + 1, 1.0);
      r.add(M.w[i], -g);
      r.add(re2, 0.5 * g);
      r.add(im2, 0.5 * b);
      r.emit(B);
    }
    {
      RowBuf r;
      r.add(tf + 2, 1.0);
      r.add(M.w[i], b);
      r.add(re2, -0.5 * b);
      r.add(im2, 0.5 * g);
      r.emit(B);
    }
    {
      RowBuf r;
      r.add(tt + 1, 1.0);
      r.add(M.w[j], -g);
      r.add(re2, 0.5 * g);
      r.add(im2, -0.5 * b);
      r.emit(B);
    }
    {
      RowBuf r;
      r.add(tt + 2, 1.0);
      r.add(M.w[j], b);
      r.add(re2, -0.5 * b);
      r.add(im2, -0.5 * g);
      r.emit(B);
    }
    // -tan(theta) Re W <= Im W <= tan(theta) Re W; these also give Re W >= 0.
    const double tn = std::tan(l.theta_max);
    const int sl = B.add_nonneg(2);
    B.add_row({{re2, tn}, {im2, -1.0}, {sl, -1.0}}, 0.0);
    B.add_row({{re2, tn}, {im2, 1.0}, {sl + 1, -1.0}}, 0.0);

    pbal[i].add(tf + 1, -1.0);
    qbal[i].add(tf + 2, -1.0);
    pbal[j].add(tt + 1, -1.0);
    qbal[j].add(tt + 2, -1.0);
  }
  for (auto& r : pbal) r.emit(B);
  for (auto& r : qbal) r.emit(B);
  M.problem = B.build();
  return M;
}

namespace detail {

inline InnerSolution solve_nf(const SubNetwork& sub) {
  const auto& net = sub.network();
  const auto g = build_nf_graph(sub);
  const auto fr = max_flow(g, g.source, g.sink);
  InnerSolution out;
  out.formulation = Formulation::NF;
  out.shed.assign(net.num_buses(), 0.0);
  out.pg.assign(net.num_buses(), 0.0);
  out.p_from.assign(net.num_lines(), 0.0);
  out.p_to.assign(net.num_lines(), 0.0);
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    const auto& arc = g.arcs[a];
    if (arc.from == g.source) out.pg[arc.to] = fr.arc_flow[a];
    if (arc.to == g.sink && arc.capacity > 0.0)
      out.shed[arc.from] = std::clamp(1.0 - fr.arc_flow[a] / arc.capacity, 0.0, 1.0);
  }
  for (auto e : sub.operational()) {
    out.p_from[e] = nf_line_flow(g, fr, e);
    out.p_to[e] = -out.p_from[e];
  }
  const double demand = net.total_demand();
  out.z = std::clamp(demand - fr.value, 0.0, demand);
  return out;
}

inline std::vector<double> read(const std::vector<Affine>& v, const Eigen::VectorXd& x) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].value(x);
  return out;
}

}  // namespace detail

/// Solve a built model and read the solution back in network terms.
inline InnerSolution solve_model(const InnerModel& M, const SubNetwork& sub, const ConeOptions& cone = {}) {
  const auto& net = sub.network();
  const auto sol = solve_conic(M.problem, cone);
  InnerSolution out;
  out.formulation = M.formulation;
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status == ConeStatus::PrimalInfeasible)
    throw DomainError("inner problem is infeasible (generator minimums cannot be met)");
  if (sol.status != ConeStatus::Optimal)
    throw NumericalError(std::string("inner solve failed: ") + to_string(sol.status));
  const auto& x = sol.x;
  out.shed = detail::read(M.shed, x);
  for (auto& l : out.shed) l = std::clamp(l, 0.0, 1.0);
  out.pg = detail::read(M.pg, x);
  out.p_from = detail::read(M.p_from, x);
  out.p_to = detail::read(M.p_to, x);
  if (M.formulation == Formulation::SOC) {
    out.qg = detail::read(M.qg, x);
    out.q_from = detail::read(M.q_from, x);
    out.q_to = detail::read(M.q_to, x);
    out.w = detail::read(M.w, x);
    out.w_re.assign(net.num_lines(), 0.0);
    out.w_im.assign(net.num_lines(), 0.0);
    for (auto e : sub.operational()) {
      out.w_re[e] = 0.5 * x[M.w_re2[e]];
      out.w_im[e] = 0.5 * x[M.w_im2[e]];
    }
  }
  double z = 0.0;
  for (std::size_t i = 0; i < net.num_buses(); ++i) z += std::max(net.bus(i).pd, 0.0) * out.shed[i];
  out.z = std::clamp(z, 0.0, net.total_demand());
  return out;
}

inline InnerSolution solve_inner(const SubNetwork& sub, Formulation f, const InnerOptions& opt = {}) {
  InnerSolution out;
  switch (f) {
    case Formulation::NF: out = detail::solve_nf(sub); break;
    case Formulation::DC: out = solve_model(build_dc(sub, opt), sub, opt.cone); break;
    case Formulation::SOC: out = solve_model(build_soc(sub, opt), sub, opt.cone); break;
  }
  out.active.assign(sub.network().num_lines(), 0);
  for (auto e : sub.operational()) out.active[e] = 1;
  return out;
}

inline InnerSolution solve_inner(const Network& net, const Scenario& s, Formulation f, const InnerOptions& opt = {}) {
  const auto sub = apply_scenario(net, s);
  try {
    return solve_inner(sub, f, opt);
  } catch (const NumericalError& e) {
    std::string ids;
    for (int id : s.interdicted) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw NumericalError(std::string(e.what()) + " (" + to_string(f) + ", scenario {" + ids + "})");
  }
}

/// Shed values below this are treated as zero by the master and the oracle.
inline double shed_floor(const Network& net) { return 1e-9 * net.total_demand(); }

/// alpha_ij = max(|p_ij|, |p_ji|) on surviving lines, zero on interdicted ones.
inline CutCoefficients cut_coefficients(const InnerSolution& sol, const SubNetwork& sub) {
  CutCoefficients cut;
  cut.z_hat = sol.z;
  cut.alpha.assign(sub.network().num_lines(), 0.0);
  for (auto e : sub.operational()) cut.alpha[e] = std::max(std::abs(sol.p_from[e]), std::abs(sol.p_to[e]));
  return cut;
}

struct TightnessReport {
  std::vector<std::size_t> lines;  // operational line positions
  std::vector<double> gap;         // W_ii W_jj - |W_ij|^2
  double max = 0.0;
  double mean = 0.0;
  double min = 0.0;
};

inline TightnessReport soc_tightness(const InnerSolution& sol, const Network& net) {
  if (sol.formulation != Formulation::SOC) throw UsageError("tightness is only defined for SOC solutions");
  TightnessReport r;
  for (std::size_t e = 0; e < net.num_lines(); ++e) {
    if (!sol.active[e]) continue;
    const auto& l = net.line(e);
    const double wi = sol.w[net.bus_index(l.from_bus)], wj = sol.w[net.bus_index(l.to_bus)];
    r.lines.push_back(e);
    r.gap.push_back(wi * wj - (sol.w_re[e] * sol.w_re[e] + sol.w_im[e] * sol.w_im[e]));
  }
  if (!r.gap.empty()) {
    r.max = *std::max_element(r.gap.begin(), r.gap.end());
    r.min = *std::min_element(r.gap.begin(), r.gap.end());
    double s = 0.0;
    for (double g : r.gap) s += g;
    r.mean = s / static_cast<double>(r.gap.size());
  }
  return r;
}

}  // namespace pnk

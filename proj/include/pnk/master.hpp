#pragma once

// Cutting-plane driver for the probabilistic N-k problem. The master problem
//
//   max  sum_e log(pr_e) x_e + t
//   s.t. sum_e x_e = k,  x binary,  0 <= z <= sum pd
//        z <= z_s + sum_e alpha_e(s) x_e     (shed cuts)
//        sum_{e in s} x_e <= k - 1           (logical cuts)
//        t <= log zh + (z - zh) / zh          (outer approximation of log z)
//
// is solved by best-bound branch-and-bound over LP relaxations handled by the
// conic solver; each master optimum proposes the next scenario to evaluate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pnk/conic.hpp"
#include "pnk/grid.hpp"
#include "pnk/inner.hpp"

namespace pnk {

using Clock = std::chrono::steady_clock;

class MasterProblem {
 public:
  MasterProblem(const Network& net, int k) : net_(&net), k_(k), z_max_(net.total_demand()) {
    if (k < 1) throw UsageError("k must be at least 1");
    if (static_cast<std::size_t>(k) > net.num_lines())
      throw UsageError("k = " + std::to_string(k) + " exceeds the number of lines (" + std::to_string(net.num_lines()) + ")");
    if (!net.has_probabilities()) throw UsageError("every line needs a failure probability");
    for (const auto& l : net.lines()) log_pr_.push_back(std::log(l.pr));
  }

  const Network& network() const { return *net_; }
  int k() const { return k_; }
  std::size_t num_lines() const { return log_pr_.size(); }
  double z_max() const { return z_max_; }
  std::span<const double> log_pr() const { return log_pr_; }
  std::span<const CutCoefficients> shed_cuts() const { return shed_; }
  std::span<const std::vector<std::size_t>> logical_cuts() const { return logical_; }
  std::span<const double> oa_points() const { return oa_; }

  void add_shed_cut(const CutCoefficients& cut) {
    if (cut.alpha.size() != num_lines()) throw UsageError("cut has wrong number of coefficients");
    shed_.push_back(cut);
  }

  void add_logical_cut(const Scenario& s) {
    std::vector<std::size_t> lines;
    for (int id : s.interdicted) lines.push_back(net_->line_index(id));
    add_logical_cut(lines);
  }

  void add_logical_cut(std::span<const std::size_t> lines) {
    if (lines.size() != static_cast<std::size_t>(k_)) throw UsageError("logical cut needs exactly k lines");
    std::vector<std::size_t> v(lines.begin(), lines.end());
    std::sort(v.begin(), v.end());
    logical_.push_back(std::move(v));
  }

  void add_oa_cut(double z_hat) {
    if (!(z_hat > 0.0)) throw DomainError("outer-approximation point must be positive");
    oa_.push_back(z_hat);
  }

  double log_prob(std::span<const std::size_t> lines) const {
    double p = 0.0;
    for (auto e : lines) p += log_pr_[e];
    return p;
  }

  /// Largest z the shed cuts allow for the scenario.
  double z_bound(std::span<const std::size_t> lines) const {
    double z = z_max_;
    for (const auto& c : shed_) {
      double r = c.z_hat;
      for (auto e : lines) r += c.alpha[e];
      z = std::min(z, r);
    }
    return std::max(z, 0.0);
  }

  /// Largest t the outer approximation allows at z.
  double t_bound(double z) const {
    double t = std::numeric_limits<double>::infinity();
    for (double zh : oa_) t = std::min(t, std::log(zh) + (z - zh) / zh);
    return t;
  }

  /// Master objective p + t of an integral point.
  double value(std::span<const std::size_t> lines) const { return log_prob(lines) + t_bound(z_bound(lines)); }

  bool excluded(std::span<const std::size_t> sorted_lines) const {
    for (const auto& c : logical_)
      if (std::equal(c.begin(), c.end(), sorted_lines.begin(), sorted_lines.end())) return true;
    return false;
  }

 private:
  const Network* net_;
  int k_;
  double z_max_;
  std::vector<double> log_pr_;
  std::vector<CutCoefficients> shed_;
  std::vector<std::vector<std::size_t>> logical_;
  std::vector<double> oa_;
};

// Cutoff: no integral point beats MasterOptions::cutoff; `bound` still bounds the optimum.
enum class MasterStatus { Optimal, Infeasible, Cutoff, NodeLimit, TimeLimit };

struct MasterOptions {
  std::int64_t node_limit = 1'000'000;
  double integrality_tol = 1e-6;
  double bound_tol = 1e-8;
  // Nodes whose bound cannot exceed this value are discarded.
  double cutoff = -std::numeric_limits<double>::infinity();
  Clock::time_point deadline = Clock::time_point::max();
  ConeOptions cone;
};

struct MasterResult {
  MasterStatus status = MasterStatus::Infeasible;
  std::vector<std::size_t> lines;  // ascending positions
  double value = -std::numeric_limits<double>::infinity();  // p + t
  double z = 0.0;
  double bound = -std::numeric_limits<double>::infinity();  // best bound over all nodes
  std::int64_t nodes = 0;
};

namespace detail {

struct Node {
  std::vector<signed char> fixed;  // -1 free, 0 or 1
  double bound;
  std::int64_t id;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

struct NodeLp {
  bool infeasible = false;
  bool solved = false;
  double bound = 0.0;
  std::vector<double> x;  // per line, fixed values included
};

inline NodeLp solve_node(const MasterProblem& m, const std::vector<signed char>& fixed, const ConeOptions& cone) {
  NodeLp out;
  const std::size_t n = m.num_lines();
  std::vector<int> col(n, -1);
  std::vector<std::size_t> free_lines;
  int ones = 0;
  double p_fixed = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    if (fixed[e] < 0) {
      col[e] = static_cast<int>(free_lines.size());
      free_lines.push_back(e);
    } else if (fixed[e] == 1) {
      ++ones;
      p_fixed += m.log_pr()[e];
    }
  }
  const int need = m.k() - ones;
  const int nf = static_cast<int>(free_lines.size());
  if (need < 0 || need > nf) {
    out.infeasible = true;
    return out;
  }

  // Logical rows after substituting the fixings.
  struct Logical {
    std::vector<int> cols;
    double rhs;
  };
  std::vector<Logical> logical;
  for (const auto& c : m.logical_cuts()) {
    Logical row{{}, static_cast<double>(m.k() - 1)};
    for (auto e : c) {
      if (fixed[e] < 0) row.cols.push_back(col[e]);
      else if (fixed[e] == 1) row.rhs -= 1.0;
    }
    if (row.rhs < 0.0 && row.cols.empty()) {
      out.infeasible = true;
      return out;
    }
    if (static_cast<double>(row.cols.size()) > row.rhs) logical.push_back(std::move(row));
  }
  if (need == 0 || need == nf) {
    // Every free variable is forced; no LP needed.
    out.x.assign(n, 0.0);
    std::vector<std::size_t> lines;
    for (std::size_t e = 0; e < n; ++e) {
      out.x[e] = fixed[e] < 0 ? (need == 0 ? 0.0 : 1.0) : fixed[e];
      if (out.x[e] > 0.5) lines.push_back(e);
    }
    if (m.excluded(lines)) {
      out.infeasible = true;
      return out;
    }
    out.bound = m.value(lines);
    out.solved = true;
    return out;
  }

  const int num_shed = static_cast<int>(m.shed_cuts().size());
  const int num_oa = static_cast<int>(m.oa_points().size());
  const int num_logical = static_cast<int>(logical.size());

  ConeBuilder B;
  const int x0 = B.add_nonneg(nf);
  const int u0 = B.add_nonneg(nf);
  const int z = B.add_nonneg();
  const int uz = B.add_nonneg();
  const int s0 = B.add_nonneg(num_shed + num_oa + num_logical);
  const int t = B.add_free();
  for (int j = 0; j < nf; ++j) B.set_cost(x0 + j, -m.log_pr()[free_lines[j]]);
  B.set_cost(t, -1.0);

  std::vector<std::pair<int, double>> terms;
  terms.reserve(nf + 3);
  for (int j = 0; j < nf; ++j) terms.emplace_back(x0 + j, 1.0);
  B.add_row(terms, need);
  for (int j = 0; j < nf; ++j) B.add_row({{x0 + j, 1.0}, {u0 + j, 1.0}}, 1.0);
  B.add_row({{z, 1.0}, {uz, 1.0}}, m.z_max());

  int s = s0;
  for (const auto& c : m.shed_cuts()) {
    terms.clear();
    double rhs = c.z_hat;
    for (std::size_t e = 0; e < n; ++e)
      if (fixed[e] == 1) rhs += c.alpha[e];
    terms.emplace_back(z, 1.0);
    for (int j = 0; j < nf; ++j)
      if (c.alpha[free_lines[j]] != 0.0) terms.emplace_back(x0 + j, -c.alpha[free_lines[j]]);
    terms.emplace_back(s++, 1.0);
    B.add_row(terms, rhs);
  }
  for (double zh : m.oa_points()) B.add_row({{t, 1.0}, {z, -1.0 / zh}, {s++, 1.0}}, std::log(zh) - 1.0);
  for (const auto& row : logical) {
    terms.clear();
    for (int j : row.cols) terms.emplace_back(x0 + j, 1.0);
    terms.emplace_back(s++, 1.0);
    B.add_row(terms, row.rhs);
  }

  const auto sol = solve_conic(B.build(), cone);
  if (sol.status == ConeStatus::PrimalInfeasible) {
    out.infeasible = true;
    return out;
  }
  if (sol.status != ConeStatus::Optimal) return out;
  out.solved = true;
  out.bound = p_fixed - sol.objective;
  out.x.assign(n, 0.0);
  for (std::size_t e = 0; e < n; ++e)
    out.x[e] = fixed[e] < 0 ? std::clamp(sol.x[x0 + col[e]], 0.0, 1.0) : fixed[e];
  return out;
}

}  // namespace detail

/// Optimal scenario of the current master relaxation by branch-and-bound.
inline MasterResult solve_master(const MasterProblem& m, const MasterOptions& opt = {}) {
  if (m.oa_points().empty()) throw UsageError("master needs at least one outer-approximation cut");
  const std::size_t n = m.num_lines();
  const auto& net = m.network();
  MasterResult res;

  std::priority_queue<detail::Node, std::vector<detail::Node>, detail::NodeOrder> open;
  std::int64_t next_id = 0;
  open.push({std::vector<signed char>(n, -1), std::numeric_limits<double>::infinity(), next_id++});
  // Largest bound among nodes discarded by the cutoff rather than by the incumbent.
  double cut_bound = -std::numeric_limits<double>::infinity();
  const auto prune = [&](double bound) {
    if (bound <= opt.cutoff) {
      cut_bound = std::max(cut_bound, bound);
      return true;
    }
    return std::isfinite(res.value) && bound <= res.value + opt.bound_tol * std::max(1.0, std::abs(res.value));
  };

  while (!open.empty()) {
    if (res.nodes >= opt.node_limit || Clock::now() > opt.deadline) {
      res.status = res.nodes >= opt.node_limit ? MasterStatus::NodeLimit : MasterStatus::TimeLimit;
      res.bound = std::max({res.value, cut_bound, open.top().bound});
      if (!res.lines.empty()) res.z = m.z_bound(res.lines);
      return res;
    }
    auto node = open.top();
    open.pop();
    if (prune(node.bound)) continue;
    ++res.nodes;

    const auto lp = detail::solve_node(m, node.fixed, opt.cone);
    if (lp.infeasible) continue;
    double bound = node.bound;
    if (lp.solved) {
      bound = std::min(bound, lp.bound);
      if (prune(bound)) continue;

      bool integral = true;
      for (std::size_t e = 0; e < n && integral; ++e)
        integral = std::abs(lp.x[e] - std::round(lp.x[e])) <= opt.integrality_tol;
      if (integral) {
        std::vector<std::size_t> lines;
        for (std::size_t e = 0; e < n; ++e)
          if (lp.x[e] > 0.5) lines.push_back(e);
        if (lines.size() == static_cast<std::size_t>(m.k()) && !m.excluded(lines)) {
          const double v = m.value(lines);
          if (v <= opt.cutoff) {
            cut_bound = std::max(cut_bound, bound);
          } else if (v > res.value) {
            res.value = v;
            res.lines = std::move(lines);
          }
          continue;
        }
      }
    }

    // Most fractional free variable; ties go to the smallest line id.
    std::size_t pick = n;
    double best = -1.0;
    for (std::size_t e = 0; e < n; ++e) {
      if (node.fixed[e] >= 0) continue;
      const double frac = lp.solved ? std::min(lp.x[e], 1.0 - lp.x[e]) : 0.0;
      if (pick == n || frac > best + 1e-12 || (std::abs(frac - best) <= 1e-12 && net.line(e).id < net.line(pick).id)) {
        best = frac;
        pick = e;
      }
    }
    if (pick == n) continue;
    for (signed char v : {1, 0}) {
      auto child = node.fixed;
      child[pick] = v;
      open.push({std::move(child), bound, next_id++});
    }
  }

  if (!res.lines.empty()) {
    res.status = MasterStatus::Optimal;
    res.bound = res.value;
    res.z = m.z_bound(res.lines);
  } else if (std::isfinite(cut_bound)) {
    res.status = MasterStatus::Cutoff;
    res.bound = cut_bound;
  } else {
    res.status = MasterStatus::Infeasible;
  }
  return res;
}

enum class Termination { Converged, TimeLimit, Exhausted };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::TimeLimit: return "time-limit";
    case Termination::Exhausted: return "exhausted";
  }
  return "?";
}

struct TraceEntry {
  int iter = 0;
  std::vector<int> scenario;
  double z_pu = 0.0;
  double f_lb = 0.0;
  double f_ub = 0.0;

  bool operator==(const TraceEntry&) const = default;
};

struct SolveFlags {
  bool respect_pg_min = false;
  bool dc_angle_limits = true;
  bool bound_from_z = false;

  bool operator==(const SolveFlags&) const = default;
};

struct SolveReport {
  std::string case_name;
  int k = 0;
  Formulation formulation = Formulation::NF;
  double epsilon = 0.01;
  Termination status = Termination::Exhausted;
  std::vector<int> best_scenario;
  double z_pu = 0.0;
  double log_prob = -std::numeric_limits<double>::infinity();
  double f_best = -std::numeric_limits<double>::infinity();  // p + log z of the incumbent
  double weighted_mw = 0.0;
  double upper_bound = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double wall_seconds = 0.0;
  std::vector<TraceEntry> trace;
  SolveFlags flags;
  std::uint64_t seed = 0;
  bool heuristic = false;  // cut validity is only guaranteed for NF
  double base_mva = 100.0;
  // Every shed cut emitted, in iteration order; filled only on request.
  std::vector<CutCoefficients> cuts;

  bool has_incumbent() const { return std::isfinite(f_best); }
  bool operator==(const SolveReport&) const = default;
};

struct CuttingPlaneOptions {
  double epsilon = 0.01;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  InnerOptions inner;
  MasterOptions master;
  bool bound_from_z = false;
  bool record_cuts = false;
};

/// Initial scenario: the k lines with the largest thermal limit, ties by id.
inline std::vector<std::size_t> initial_scenario(const Network& net, int k) {
  std::vector<std::size_t> order(net.num_lines());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (net.line(a).t != net.line(b).t) return net.line(a).t > net.line(b).t;
    return net.line(a).id < net.line(b).id;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

inline SolveReport cutting_plane(const Network& net, int k, Formulation f, const CuttingPlaneOptions& opt = {}) {
  if (!(opt.epsilon > 0.0)) throw UsageError("epsilon must be positive");
  const auto start = Clock::now();
  const auto deadline = std::isfinite(opt.time_limit)
                            ? start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(opt.time_limit))
                            : Clock::time_point::max();
  MasterProblem m(net, k);
  m.add_oa_cut(m.z_max());
  const double floor = shed_floor(net);
  const double tol = std::log1p(opt.epsilon);

  SolveReport rep;
  rep.k = k;
  rep.formulation = f;
  rep.epsilon = opt.epsilon;
  rep.flags = {opt.inner.respect_pg_min, opt.inner.dc_angle_limits, opt.bound_from_z};
  rep.heuristic = f != Formulation::NF;
  rep.base_mva = net.base_mva();

  auto master_opt = opt.master;
  master_opt.deadline = std::min(master_opt.deadline, deadline);

  std::vector<std::size_t> current = initial_scenario(net, k);
  double f_lb = -std::numeric_limits<double>::infinity();
  double f_ub = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best;
  double best_z = 0.0;

  while (true) {
    // The initial scenario is always evaluated so the report has an incumbent.
    if (rep.iterations > 0 && Clock::now() > deadline) {
      rep.status = Termination::TimeLimit;
      break;
    }
    const Scenario s = scenario_from_indices(net, current);
    const auto sub = apply_scenario(net, s);
    InnerSolution sol;
    try {
      sol = solve_inner(sub, f, opt.inner);
    } catch (const NumericalError& e) {
      std::string ids;
      for (int id : s.interdicted) ids += (ids.empty() ? "" : ",") + std::to_string(id);
      throw NumericalError(std::string(e.what()) + " (" + to_string(f) + ", scenario {" + ids + "})");
    }
    ++rep.iterations;
    const double z = sol.z >= floor ? sol.z : 0.0;
    if (z > 0.0) {
      const double val = s.log_prob + std::log(z);
      if (val > f_lb) {
        f_lb = val;
        best = current;
        best_z = z;
      }
    }
    auto cut = cut_coefficients(sol, sub);
    cut.z_hat = z;
    m.add_shed_cut(cut);
    m.add_logical_cut(current);
    if (z > 0.0) m.add_oa_cut(z);
    if (opt.record_cuts) rep.cuts.push_back(cut);

    // Only a master value above f* + log(1+eps) can keep the loop going.
    if (std::isfinite(f_lb) && !opt.bound_from_z) master_opt.cutoff = f_lb + tol;
    const auto mr = solve_master(m, master_opt);
    TraceEntry entry{rep.iterations, s.interdicted, z, f_lb, f_ub};
    if (mr.status == MasterStatus::Infeasible) {
      // Every scenario has been evaluated: the incumbent is optimal.
      f_ub = f_lb;
      entry.f_ub = f_ub;
      rep.trace.push_back(entry);
      rep.status = Termination::Exhausted;
      break;
    }
    if (mr.status == MasterStatus::Cutoff) {
      f_ub = std::min(f_ub, std::max(f_lb, mr.bound));
      entry.f_ub = f_ub;
      rep.trace.push_back(entry);
      rep.status = Termination::Converged;
      break;
    }
    if (mr.status == MasterStatus::TimeLimit || mr.lines.empty()) {
      f_ub = std::min(f_ub, std::max(f_lb, mr.bound));
      entry.f_ub = f_ub;
      rep.trace.push_back(entry);
      rep.status = Termination::TimeLimit;
      break;
    }
    double bound = mr.status == MasterStatus::Optimal ? mr.value : mr.bound;
    if (opt.bound_from_z) bound = mr.z > 0.0 ? m.log_prob(mr.lines) + std::log(mr.z) : -std::numeric_limits<double>::infinity();
    // Scenarios already evaluated are cut off from the master, so the
    // incumbent itself also bounds the optimum.
    f_ub = std::min(f_ub, std::max(f_lb, bound));
    entry.f_ub = f_ub;
    rep.trace.push_back(entry);
    if (f_ub - f_lb <= tol) {
      rep.status = Termination::Converged;
      break;
    }
    current = mr.lines;
  }

  // Inner-solve noise can put f* a hair above a bound recorded earlier.
  rep.upper_bound = std::isfinite(f_lb) ? std::max(f_ub, f_lb) : f_ub;
  rep.f_best = f_lb;
  if (!best.empty()) {
    const auto bs = scenario_from_indices(net, best);
    rep.best_scenario = bs.interdicted;
    rep.log_prob = bs.log_prob;
    rep.z_pu = best_z;
    rep.weighted_mw = std::exp(bs.log_prob) * best_z * net.base_mva();
    rep.gap = std::max(0.0, std::expm1(f_ub - f_lb));
  }
  rep.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

/// Size of the symmetric difference of two interdiction plans.
inline int hamming(const Scenario& a, const Scenario& b) {
  if (a.k() != b.k()) throw UsageError("plans have different k");
  std::vector<int> x = a.interdicted, y = b.interdicted;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<int> diff;
  std::set_symmetric_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(diff));
  return static_cast<int>(diff.size());
}

}  // namespace pnk

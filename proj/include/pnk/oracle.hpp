#pragma once

// Complete enumeration of all k-line scenarios for one inner formulation.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pnk/inner.hpp"

namespace pnk {

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // r * num / i is exact because r * num is divisible by i.
    const std::uint64_t g = std::gcd(r, i);
    const std::uint64_t rr = r / g, ii = i / g;
    const std::uint64_t nn = num / ii;
    if (rr != 0 && nn > UINT64_MAX / rr) return UINT64_MAX;
    r = rr * nn;
  }
  return r;
}

/// The rank-th k-subset of {0..n-1} in colexicographic order.
inline std::vector<std::size_t> unrank_colex(std::uint64_t rank, std::size_t k) {
  std::vector<std::size_t> c(k);
  for (std::size_t i = k; i >= 1; --i) {
    std::size_t v = i - 1;
    while (binomial(v + 1, i) <= rank) ++v;
    c[i - 1] = v;
    rank -= binomial(v, i);
  }
  return c;
}

/// Advance to the colex successor; false after the last subset.
inline bool next_colex(std::vector<std::size_t>& c, std::size_t n) {
  const std::size_t k = c.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t limit = i + 1 < k ? c[i + 1] : n;
    if (c[i] + 1 < limit) {
      ++c[i];
      for (std::size_t j = 0; j < i; ++j) c[j] = j;
      return true;
    }
  }
  return false;
}

struct EnumerationRecord {
  Scenario scenario;
  double z = 0.0;         // pu
  double weighted_mw = 0.0;

  double log_prob() const { return scenario.log_prob; }
};

struct EnumerationTable {
  Formulation formulation = Formulation::NF;
  int k = 0;
  double base_mva = 100.0;
  std::vector<EnumerationRecord> records;  // colex order
  std::optional<std::size_t> best;         // none when no scenario sheds load
  double wall_seconds = 0.0;

  std::size_t total() const { return records.size(); }
  const EnumerationRecord& best_record() const {
    if (!best) throw UsageError("no scenario sheds load");
    return records[*best];
  }
  double best_objective() const { return best ? best_record().log_prob() + std::log(best_record().z) : -std::numeric_limits<double>::infinity(); }
};

struct EnumerateOptions {
  int workers = 1;
  std::uint64_t cap = 1'000'000;
  InnerOptions inner;
};

inline EnumerationTable enumerate(const Network& net, int k, Formulation f, const EnumerateOptions& opt = {}) {
  if (k < 1) throw UsageError("k must be at least 1");
  if (static_cast<std::size_t>(k) > net.num_lines()) throw UsageError("k exceeds the number of lines");
  if (opt.workers < 1) throw UsageError("workers must be at least 1");
  const std::size_t n = net.num_lines();
  const std::uint64_t count = binomial(n, k);
  if (count > opt.cap)
    throw UsageError("enumeration would solve " + std::to_string(count) + " scenarios, above the cap of " +
                     std::to_string(opt.cap));

  const auto start = std::chrono::steady_clock::now();
  EnumerationTable table;
  table.formulation = f;
  table.k = k;
  table.base_mva = net.base_mva();
  table.records.resize(count);

  const std::uint64_t workers = std::min<std::uint64_t>(opt.workers, std::max<std::uint64_t>(count, 1));
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::uint64_t w = 0; w < workers; ++w) {
      const std::uint64_t lo = count * w / workers, hi = count * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        try {
          if (lo == hi) return;
          auto c = unrank_colex(lo, k);
          for (std::uint64_t r = lo; r < hi; ++r) {
            auto& rec = table.records[r];
            rec.scenario = scenario_from_indices(net, c);
            rec.z = solve_inner(net, rec.scenario, f, opt.inner).z;
            rec.weighted_mw = std::exp(rec.scenario.log_prob) * rec.z * net.base_mva();
            next_colex(c, n);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const double floor = shed_floor(net);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < table.records.size(); ++r) {
    const auto& rec = table.records[r];
    if (rec.z < floor) continue;
    const double obj = rec.scenario.log_prob + std::log(rec.z);
    if (!table.best) {
      best = obj;
      table.best = r;
      continue;
    }
    const double tie = 1e-12 * std::max(1.0, std::abs(best));
    if (obj > best + tie ||
        (std::abs(obj - best) <= tie && rec.scenario.interdicted < table.records[*table.best].scenario.interdicted)) {
      best = std::max(best, obj);
      table.best = r;
    }
  }
  table.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return table;
}

inline std::string enumeration_csv(const EnumerationTable& t) {
  std::ostringstream out;
  out.precision(17);
  out << "scenario_lines;z_pu;log_prob;weighted_mw\n";
  for (const auto& r : t.records) {
    for (std::size_t i = 0; i < r.scenario.interdicted.size(); ++i)
      out << (i ? "," : "") << r.scenario.interdicted[i];
    out << ';' << r.z << ';' << r.scenario.log_prob << ';' << r.weighted_mw << '\n';
  }
  return out.str();
}

struct CutAudit {
  std::size_t cuts = 0;
  std::size_t checks = 0;
  std::size_t violations = 0;
  double max_violation = 0.0;  // pu

  bool all_valid() const { return violations == 0; }
};

/// Check z_s <= z_hat + sum(alpha over lines of s) for every cut and every row.
inline CutAudit audit_cuts(const EnumerationTable& t, const Network& net, std::span<const CutCoefficients> cuts,
                           double tol = 1e-7) {
  CutAudit a;
  a.cuts = cuts.size();
  for (const auto& cut : cuts)
    for (const auto& r : t.records) {
      double rhs = cut.z_hat;
      for (int id : r.scenario.interdicted) rhs += cut.alpha[net.line_index(id)];
      ++a.checks;
      const double excess = r.z - rhs;
      if (excess > tol) {
        ++a.violations;
        a.max_violation = std::max(a.max_violation, excess);
      }
    }
  return a;
}

}  // namespace pnk

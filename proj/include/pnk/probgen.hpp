#pragma once

// Line-failure probability generators: severe-event scaling, budget-normalized
// samples and range-uniform draws. All randomness comes from SplitMix64.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pnk/grid.hpp"

namespace pnk {

/// SplitMix64 (Steele, Lea and Flood). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  static constexpr const char* name = "splitmix64";

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return UINT64_MAX; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double open_unit() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Pr + n (1 - Pr) / 5 on the region, Pr elsewhere.
inline std::vector<double> severe_event(std::span<const double> pr_r, std::span<const char> in_region, int n) {
  if (pr_r.size() != in_region.size()) throw UsageError("region mask size does not match line count");
  if (n < 0) throw DomainError("severe-event level must be nonnegative");
  std::vector<double> out(pr_r.begin(), pr_r.end());
  for (std::size_t e = 0; e < out.size(); ++e) {
    if (!(pr_r[e] > 0.0 && pr_r[e] <= 1.0)) throw DomainError("reliability probability outside (0,1]");
    if (in_region[e]) out[e] = std::min(1.0, pr_r[e] + n * (1.0 - pr_r[e]) / 5.0);
  }
  return out;
}

/// Scale raw samples to sum to `budget`. Values pushed past 1 are clamped and
/// the excess is spread proportionally over the rest until none exceed 1.
inline std::vector<double> budget_normalize(std::span<const double> raw, double budget) {
  if (raw.empty()) throw UsageError("no samples to normalize");
  if (!(budget > 0.0)) throw DomainError("probability budget must be positive");
  if (budget > static_cast<double>(raw.size()))
    throw DomainError("probability budget " + std::to_string(budget) + " exceeds the line count " +
                      std::to_string(raw.size()));
  for (double r : raw)
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("raw samples must be positive and finite");

  std::vector<double> out(raw.size());
  std::vector<char> clamped(raw.size(), 0);
  std::size_t n_clamped = 0;
  while (true) {
    double free_sum = 0.0;
    for (std::size_t e = 0; e < raw.size(); ++e)
      if (!clamped[e]) free_sum += raw[e];
    const double remaining = budget - static_cast<double>(n_clamped);
    bool changed = false;
    for (std::size_t e = 0; e < raw.size(); ++e) {
      if (clamped[e]) {
        out[e] = 1.0;
        continue;
      }
      out[e] = raw[e] * (remaining / free_sum);
      if (out[e] > 1.0) {
        clamped[e] = 1;
        ++n_clamped;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

enum class SampleMode { Det, Uniform, Texp };

inline SampleMode parse_sample_mode(std::string_view s) {
  if (s == "det") return SampleMode::Det;
  if (s == "uniform") return SampleMode::Uniform;
  if (s == "texp") return SampleMode::Texp;
  throw UsageError("unknown sampling mode '" + std::string(s) + "' (expected det, uniform or texp)");
}

/// Mean of the density e^{-x} / (1 - e^{-1}) on (0, 1).
inline double texp_mean() { return (1.0 - 2.0 / std::numbers::e) / (1.0 - 1.0 / std::numbers::e); }

inline std::vector<double> sample(SampleMode mode, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw UsageError("sample count must be at least 1");
  std::vector<double> out(count, 0.5);
  SplitMix64 rng(seed);
  const double mass = -std::expm1(-1.0);
  switch (mode) {
    case SampleMode::Det: break;
    case SampleMode::Uniform:
      for (auto& v : out) v = rng.open_unit();
      break;
    case SampleMode::Texp:
      // Inverse CDF of the truncated exponential.
      for (auto& v : out) v = -std::log1p(-rng.open_unit() * mass);
      break;
  }
  return out;
}

/// i.i.d. U(pmin, pmax) draws, where pmin and pmax are the reference extremes.
inline std::vector<double> range_uniform(std::span<const double> reference, std::size_t count, std::uint64_t seed) {
  if (reference.empty()) throw UsageError("reference probabilities are empty");
  const auto [lo, hi] = std::minmax_element(reference.begin(), reference.end());
  SplitMix64 rng(seed);
  std::vector<double> out(count);
  for (auto& v : out) v = *lo == *hi ? *lo : *lo + (*hi - *lo) * rng.open_unit();
  return out;
}

/// Line ids, one per line. Blank lines and text after '#' are ignored.
inline std::vector<int> parse_region(std::string_view text) {
  std::vector<int> ids;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    std::istringstream ls(raw);
    int id = 0;
    if (!(ls >> id)) {
      if (raw.find_first_not_of(" \t\r") != std::string::npos) throw ParseError("expected a line id", line_no);
      continue;
    }
    std::string rest;
    if (ls >> rest) throw ParseError("expected one line id per line", line_no);
    ids.push_back(id);
  }
  return ids;
}

inline std::vector<char> region_mask(const Network& net, std::span<const int> ids) {
  std::vector<char> mask(net.num_lines(), 0);
  for (int id : ids) mask[net.line_index(id)] = 1;
  return mask;
}

enum class ProbMode { Passthrough, RangeUniform, SevereEvent, Det, Uniform, Texp };

struct ProbabilitySpec {
  ProbMode mode = ProbMode::Passthrough;
  std::uint64_t seed = 0;
  int severity = 0;         // severe-event level n
  std::vector<int> region;  // severe-event line ids

  bool nonstandard() const { return mode == ProbMode::SevereEvent && (severity < 1 || severity > 3); }
};

inline ProbMode parse_prob_mode(std::string_view s) {
  if (s == "passthrough") return ProbMode::Passthrough;
  if (s == "range-uniform") return ProbMode::RangeUniform;
  if (s == "severe") return ProbMode::SevereEvent;
  if (s == "det") return ProbMode::Det;
  if (s == "uniform") return ProbMode::Uniform;
  if (s == "texp") return ProbMode::Texp;
  throw UsageError("unknown probability mode '" + std::string(s) + "'");
}

/// Per-line probabilities derived from the reference data on `net`. Sampled
/// modes are normalized to the reference budget.
inline std::vector<double> generate_probabilities(const Network& net, const ProbabilitySpec& spec) {
  if (!net.has_probabilities()) throw UsageError("probability generation needs reference probabilities");
  std::vector<double> ref;
  for (const auto& l : net.lines()) ref.push_back(l.pr);
  const double budget = std::accumulate(ref.begin(), ref.end(), 0.0);
  switch (spec.mode) {
    case ProbMode::Passthrough: return ref;
    case ProbMode::RangeUniform: return range_uniform(ref, ref.size(), spec.seed);
    case ProbMode::SevereEvent: return severe_event(ref, region_mask(net, spec.region), spec.severity);
    case ProbMode::Det: return budget_normalize(sample(SampleMode::Det, ref.size(), spec.seed), budget);
    case ProbMode::Uniform: return budget_normalize(sample(SampleMode::Uniform, ref.size(), spec.seed), budget);
    case ProbMode::Texp: return budget_normalize(sample(SampleMode::Texp, ref.size(), spec.seed), budget);
  }
  return ref;
}

}  // namespace pnk

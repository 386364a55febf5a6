#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "incapprox/incremental.hpp"

namespace incapprox {

/// Sample statistics for one stratum of one window.
struct StratumStats {
  std::string stratum;
  std::uint64_t population = 0;  // B_i, items of the stratum in the window
  std::uint64_t sampled = 0;     // b_i
  double sum = 0.0;              // sum of sampled values
  double sum_sq = 0.0;           // sum of squared sampled values
  double s2 = 0.0;               // sample variance (b_i - 1 denominator); 0 when b_i < 2

  /// Builds stats from the moments of the sampled values that are non-zero for
  /// this query. The remaining sampled - m.count values are taken as zero, which
  /// is how a keyed query sees items of other keys.
  static StratumStats from_moments(std::string stratum, std::uint64_t population, std::uint64_t sampled,
                                   const Moments& m);
};

struct WindowEstimate {
  double value = 0.0;
  std::optional<double> error_bound;  // empty when degrees of freedom are exhausted
  double confidence = 0.95;
  std::int64_t dof = 0;
  std::size_t degenerate_strata = 0;  // strata sampled once, contributing no variance
  std::vector<StratumStats> per_stratum;

  double lower() const { return value - error_bound.value_or(0.0); }
  double upper() const { return value + error_bound.value_or(0.0); }
};

class MissingStratumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Stratified estimate of the window sum: value = sum_i B_i/b_i * sum_i,
/// variance = sum_i B_i (B_i - b_i) s_i^2 / b_i, f = sum_i b_i - n, and
/// error bound = t(f, (1 + confidence)/2) * sqrt(variance).
/// The bound is exactly 0 when every stratum is fully sampled.
/// Throws MissingStratumError if any stratum has b_i = 0, DomainError for a
/// confidence outside (0, 1).
WindowEstimate estimate_sum(std::span<const StratumStats> stats, double confidence);

/// Count as a sum of indicator values; stats are built from indicator moments.
WindowEstimate estimate_count(std::span<const StratumStats> stats, double confidence);

/// Mean over the window population: estimate_sum scaled by 1 / sum_i B_i.
WindowEstimate estimate_mean(std::span<const StratumStats> stats, double confidence);

}  // namespace incapprox

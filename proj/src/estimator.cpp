#include "incapprox/estimator.hpp"

#include <cmath>

#include "incapprox/tdist.hpp"

namespace incapprox {

StratumStats StratumStats::from_moments(std::string stratum, std::uint64_t population,
                                        std::uint64_t sampled, const Moments& m) {
  StratumStats s;
  s.stratum = std::move(stratum);
  s.population = population;
  s.sampled = sampled;
  s.sum = m.sum;
  s.sum_sq = m.sum_sq();
  if (sampled >= 2) {
    const Moments zeros{sampled > m.count ? sampled - m.count : 0, 0.0, 0.0};
    const Moments all = Moments::combine(m, zeros);
    s.s2 = all.m2 / static_cast<double>(sampled - 1);
  }
  return s;
}

WindowEstimate estimate_sum(std::span<const StratumStats> stats, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");

  WindowEstimate est;
  est.confidence = confidence;
  est.per_stratum.assign(stats.begin(), stats.end());

  double variance = 0.0;
  bool fully_sampled = true;
  std::int64_t sampled_total = 0;
  for (const auto& s : stats) {
    if (s.sampled == 0) throw MissingStratumError("stratum '" + s.stratum + "' has no sampled items");
    const double B = static_cast<double>(s.population);
    const double b = static_cast<double>(s.sampled);
    est.value += B * s.sum / b;
    if (s.sampled < s.population) {
      fully_sampled = false;
      variance += B * (B - b) * s.s2 / b;
    }
    if (s.sampled == 1 && s.population > 1) ++est.degenerate_strata;
    sampled_total += static_cast<std::int64_t>(s.sampled);
  }
  est.dof = sampled_total - static_cast<std::int64_t>(stats.size());

  if (fully_sampled) {
    est.error_bound = 0.0;
  } else if (est.dof > 0) {
    const double t = t_score(static_cast<double>(est.dof), 0.5 * (1.0 + confidence));
    est.error_bound = t * std::sqrt(variance);
  }
  return est;
}

WindowEstimate estimate_count(std::span<const StratumStats> stats, double confidence) {
  return estimate_sum(stats, confidence);
}

WindowEstimate estimate_mean(std::span<const StratumStats> stats, double confidence) {
  std::uint64_t population = 0;
  for (const auto& s : stats) population += s.population;
  if (population == 0) throw MissingStratumError("mean over an empty population");
  WindowEstimate est = estimate_sum(stats, confidence);
  const double n = static_cast<double>(population);
  est.value /= n;
  if (est.error_bound) *est.error_bound /= n;
  return est;
}

}  // namespace incapprox

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "helpers.hpp"
#include "incapprox/estimator.hpp"
#include "incapprox/random.hpp"
#include "incapprox/tdist.hpp"

using namespace incapprox;

namespace {

struct Stratum {
  std::uint64_t population;
  std::vector<double> sampled;
};

StratumStats stats_of(const std::string& name, const Stratum& s) {
  Moments m;
  for (double v : s.sampled) m = Moments::combine(m, Moments::of(v));
  return StratumStats::from_moments(name, s.population, s.sampled.size(), m);
}

std::vector<StratumStats> stats_of(const std::vector<Stratum>& strata) {
  std::vector<StratumStats> out;
  for (std::size_t i = 0; i < strata.size(); ++i) out.push_back(stats_of("S" + std::to_string(i), strata[i]));
  return out;
}

// Textbook stratified estimator, computed directly from the raw values.
struct Reference {
  double value = 0;
  double bound = 0;
};

Reference reference(const std::vector<Stratum>& strata, double confidence) {
  Reference r;
  double variance = 0;
  double dof = 0;
  for (const auto& s : strata) {
    const double B = static_cast<double>(s.population);
    const double b = static_cast<double>(s.sampled.size());
    double sum = 0;
    for (double v : s.sampled) sum += v;
    const double mean = sum / b;
    double ss = 0;
    for (double v : s.sampled) ss += (v - mean) * (v - mean);
    const double s2 = b > 1 ? ss / (b - 1) : 0.0;
    r.value += B * mean;
    variance += B * (B - b) * s2 / b;
    dof += b - 1;
  }
  const boost::math::students_t dist(dof);
  r.bound = boost::math::quantile(dist, 0.5 * (1 + confidence)) * std::sqrt(variance);
  return r;
}

std::vector<double> draw(Rng& rng, std::size_t n, double mean, double sd) {
  std::vector<double> out(n);
  for (auto& v : out) v = mean + sd * standard_normal(rng);
  return out;
}

}  // namespace

TEST_CASE("t quantiles match an independent oracle") {
  const std::vector<std::pair<double, double>> points{{1, 0.75},   {2, 0.9},   {5, 0.99},  {10, 0.975},
                                                      {30, 0.975}, {100, 0.995}, {1e6, 0.975}, {3.5, 0.8}};
  for (const auto& [f, p] : points) {
    const boost::math::students_t dist(f);
    CHECK(t_score(f, p) == doctest::Approx(boost::math::quantile(dist, p)).epsilon(1e-7));
  }
  CHECK(t_score(10, 0.975) == doctest::Approx(2.2281).epsilon(1e-4));
  CHECK(t_score(1, 0.75) == doctest::Approx(1.0).epsilon(1e-6));
  const boost::math::normal normal;
  CHECK(std::abs(t_score(1e6, 0.975) - boost::math::quantile(normal, 0.975)) < 1e-3);
}

TEST_CASE("t quantiles are monotone") {
  double prev = t_score(1, 0.975);
  for (double f : {2.0, 3.0, 5.0, 10.0, 30.0, 100.0, 1000.0}) {
    const double t = t_score(f, 0.975);
    CHECK(t < prev);
    prev = t;
  }
  prev = t_score(10, 0.55);
  for (double p : {0.6, 0.75, 0.9, 0.975, 0.999}) {
    const double t = t_score(10, p);
    CHECK(t > prev);
    prev = t;
  }
}

TEST_CASE("t quantile domain") {
  CHECK_THROWS_AS(t_score(0.5, 0.9), DomainError);
  CHECK_THROWS_AS(t_score(10, 0.5), DomainError);
  CHECK_THROWS_AS(t_score(10, 1.0), DomainError);
  CHECK_THROWS_AS(t_score(10, 0.2), DomainError);
}

TEST_CASE("incomplete beta against closed forms") {
  CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3));
  CHECK(incomplete_beta(2, 1, 0.5) == doctest::Approx(0.25));
  CHECK(incomplete_beta(1, 3, 0.2) == doctest::Approx(1 - std::pow(0.8, 3)));
  CHECK(incomplete_beta(3, 4, 0) == 0.0);
  CHECK(incomplete_beta(3, 4, 1) == 1.0);
  CHECK(t_cdf(0, 7) == doctest::Approx(0.5));
}

TEST_CASE("fully sampled strata give the exact sum with a zero bound") {
  std::vector<Stratum> strata{{3, {1, 2, 3}}, {2, {10, 20}}};
  auto est = estimate_sum(stats_of(strata), 0.95);
  CHECK(est.value == 36.0);
  REQUIRE(est.error_bound.has_value());
  CHECK(*est.error_bound == 0.0);
  auto mean = estimate_mean(stats_of(strata), 0.95);
  CHECK(mean.value == doctest::Approx(36.0 / 5));
  CHECK(*mean.error_bound == 0.0);
}

TEST_CASE("single stratum estimate matches the textbook computation") {
  Rng rng(77);
  std::vector<Stratum> strata{{1000, draw(rng, 100, 50, 8)}};
  const auto est = estimate_sum(stats_of(strata), 0.95);
  const auto ref = reference(strata, 0.95);
  CHECK(testing::close_rel(est.value, ref.value));
  REQUIRE(est.error_bound.has_value());
  CHECK(testing::close_rel(*est.error_bound, ref.bound, 1e-9));
  CHECK(est.dof == 99);
}

TEST_CASE("two stratum mean matches the textbook computation") {
  Rng rng(5);
  std::vector<Stratum> strata{{400, draw(rng, 40, 10, 2)}, {900, draw(rng, 60, 30, 5)}};
  const auto est = estimate_mean(stats_of(strata), 0.9);
  const auto ref = reference(strata, 0.9);
  CHECK(testing::close_rel(est.value, ref.value / 1300));
  CHECK(testing::close_rel(*est.error_bound, ref.bound / 1300, 1e-9));
}

TEST_CASE("count estimates use indicator values") {
  // Ungrouped count: every sampled item contributes 1.
  std::vector<Stratum> all{{100, std::vector<double>(10, 1.0)}, {50, std::vector<double>(5, 1.0)}};
  auto est = estimate_count(stats_of(all), 0.95);
  CHECK(est.value == 150.0);
  CHECK(*est.error_bound == 0.0);

  // Keyed count: 4 of 10 sampled items carry the key.
  const auto keyed = StratumStats::from_moments("S", 100, 10, Moments{4, 4.0, 0.0});
  std::vector<StratumStats> v{keyed};
  auto k = estimate_count(v, 0.95);
  const std::vector<Stratum> ref_strata{{100, {1, 1, 1, 1, 0, 0, 0, 0, 0, 0}}};
  const auto ref = reference(ref_strata, 0.95);
  CHECK(k.value == doctest::Approx(40.0));
  CHECK(testing::close_rel(*k.error_bound, ref.bound, 1e-9));
}

TEST_CASE("bound shrinks as strata are sampled more heavily") {
  auto bound_for = [](std::uint64_t b) {
    StratumStats s;
    s.stratum = "S";
    s.population = 1000;
    s.sampled = b;
    s.sum = 5.0 * static_cast<double>(b);
    s.s2 = 4.0;
    std::vector<StratumStats> v{s};
    return *estimate_sum(v, 0.95).error_bound;
  };
  double prev = bound_for(2);
  for (std::uint64_t b : {5u, 10u, 50u, 200u, 999u, 1000u}) {
    const double e = bound_for(b);
    CHECK(e <= prev);
    prev = e;
  }
  CHECK(bound_for(1000) == 0.0);
  CHECK(bound_for(999) > 0.0);
}

TEST_CASE("estimate scales with the values") {
  Rng rng(12);
  std::vector<Stratum> strata{{300, draw(rng, 30, 3, 1)}, {500, draw(rng, 20, -2, 4)}};
  const auto base = estimate_sum(stats_of(strata), 0.95);
  for (double lambda : {2.5, -3.0}) {
    auto scaled = strata;
    for (auto& s : scaled)
      for (auto& v : s.sampled) v *= lambda;
    const auto est = estimate_sum(stats_of(scaled), 0.95);
    CHECK(testing::close_rel(est.value, lambda * base.value, 1e-12));
    CHECK(testing::close_rel(*est.error_bound, std::abs(lambda) * *base.error_bound, 1e-9));
  }
}

TEST_CASE("no bound without degrees of freedom; missing strata are errors") {
  std::vector<Stratum> ones{{10, {4}}, {20, {7}}};
  const auto est = estimate_sum(stats_of(ones), 0.95);
  CHECK(est.value == doctest::Approx(10 * 4 + 20 * 7));
  CHECK_FALSE(est.error_bound.has_value());
  CHECK(est.degenerate_strata == 2);
  CHECK(est.dof == 0);

  std::vector<StratumStats> missing{StratumStats{"A", 10, 0, 0, 0, 0}};
  CHECK_THROWS_AS(estimate_sum(missing, 0.95), MissingStratumError);
  std::vector<Stratum> fine{{10, {1, 2}}};
  CHECK_THROWS_AS(estimate_sum(stats_of(fine), 1.0), DomainError);
}

TEST_CASE("a stratum sampled once is flagged but still contributes") {
  std::vector<Stratum> strata{{10, {1, 2, 3}}, {5, {4}}};
  const auto est = estimate_sum(stats_of(strata), 0.95);
  CHECK(est.degenerate_strata == 1);
  CHECK(est.dof == 2);
  CHECK(est.value == doctest::Approx(10 * 2.0 + 5 * 4.0));
  CHECK(est.error_bound.has_value());
}

TEST_CASE("constant values give a mean equal to the constant") {
  std::vector<Stratum> strata{{100, std::vector<double>(10, 7.0)}, {60, std::vector<double>(6, 7.0)}};
  const auto est = estimate_mean(stats_of(strata), 0.95);
  CHECK(est.value == doctest::Approx(7.0));
  CHECK(*est.error_bound == doctest::Approx(0.0));
}

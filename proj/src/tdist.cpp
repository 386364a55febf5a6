#include "incapprox/tdist.hpp"

#include <cmath>
#include <limits>

namespace incapprox {

namespace {

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2); callers use the symmetry relation otherwise.
double beta_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 200000;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw DomainError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw DomainError("t distribution needs dof > 0");
  if (t == 0.0) return 0.5;
  // P(|T| > |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)
  const double x = 1.0 / (1.0 + t * t / dof);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double t_score(double dof, double p) {
  if (!(dof >= 1.0) || !std::isfinite(dof)) throw DomainError("t_score needs dof >= 1");
  if (!(p > 0.5 && p < 1.0)) throw DomainError("t_score needs 0.5 < p < 1");

  // Upper-tail target avoids losing digits to 1 - p in the CDF comparison.
  const double target_tail = 1.0 - p;
  auto upper_tail = [dof](double t) { return 0.5 * incomplete_beta(0.5 * dof, 0.5, 1.0 / (1.0 + t * t / dof)); };

  double lo = 0.0;
  double hi = 1.0;
  while (upper_tail(hi) > target_tail) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw DomainError("t_score bracket overflow");
  }
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (upper_tail(mid) > target_tail) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-14 * hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace incapprox

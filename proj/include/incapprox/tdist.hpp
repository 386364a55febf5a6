#pragma once

#include <stdexcept>

namespace incapprox {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// Student's t cumulative distribution with `dof` degrees of freedom.
double t_cdf(double t, double dof);

/// p-quantile of Student's t with `dof` degrees of freedom.
/// Requires dof >= 1 and 0.5 < p < 1; throws DomainError otherwise.
/// Found by bisection on t_cdf; no normal approximation is used.
double t_score(double dof, double p);

}  // namespace incapprox

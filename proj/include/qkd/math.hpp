#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qkd {

/// Binary Shannon entropy h(p) in bits, with the limit convention
/// h(0) = h(1) = 0. Evaluated on the canonical half min(p, 1-p) so that
/// h(p) == h(1-p) holds bit-exactly whenever 1-p is representable.
inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("binary_entropy: argument must lie in [0,1], got " +
                            std::to_string(p));
  }
  const double q = std::min(p, 1.0 - p);
  if (q == 0.0) {
    return 0.0;
  }
  const double r = 1.0 - q;
  const double v = -q * std::log2(q) - r * std::log2(r);
  return std::min(v, 1.0);
}

inline double log_factorial(unsigned n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

/// Poisson probability mass e^{-mu} mu^n / n!, computed in log space so
/// large n underflows gracefully instead of overflowing the power term.
inline double poisson_pmf(double mu, unsigned n) {
  if (!(mu >= 0.0)) {
    throw std::domain_error("poisson_pmf: mean must be >= 0, got " +
                            std::to_string(mu));
  }
  if (mu == 0.0) {
    return n == 0 ? 1.0 : 0.0;
  }
  const double log_p =
      static_cast<double>(n) * std::log(mu) - mu - log_factorial(n);
  return std::exp(log_p);
}

/// Upper tail 1 - sum_{n<=n_max} pmf(mu, n), clamped to [0,1]. Compensated
/// summation keeps the threshold test against tiny tails reliable.
inline double poisson_tail(double mu, unsigned n_max) {
  if (!(mu >= 0.0)) {
    throw std::domain_error("poisson_tail: mean must be >= 0, got " +
                            std::to_string(mu));
  }
  if (mu == 0.0) {
    return 0.0;
  }
  double sum = 0.0;
  double carry = 0.0;
  for (unsigned n = 0; n <= n_max; ++n) {
    const double term = poisson_pmf(mu, n) - carry;
    const double next = sum + term;
    carry = (next - sum) - term;
    sum = next;
  }
  return std::clamp(1.0 - sum, 0.0, 1.0);
}

}  // namespace qkd

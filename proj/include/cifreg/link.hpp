#pragma once

// Complementary log-log link g(u) = log(-log(1-u)) and its inverse
// h(v) = 1 - exp(-exp(v)), plus the binomial pseudo-likelihood derivatives
// used by the direct-binomial estimating equations.

#include <cmath>

#include "cifreg/errors.hpp"

namespace cifreg {

enum class LinkFunction { cloglog };

namespace cloglog {

inline double g(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("cloglog::g: argument must lie in (0,1)");
  return std::log(-std::log1p(-u));
}

inline double h(double v) { return -std::expm1(-std::exp(v)); }

/// dh/dv
inline double h_prime(double v) {
  const double e = std::exp(v);
  return e * std::exp(-e);
}

namespace detail {
// phi(u) = u / (e^u - 1) and its derivative.
inline double phi(double u) { return u < 1e-8 ? 1.0 - 0.5 * u : u / std::expm1(u); }
inline double phi_prime(double u) {
  if (u < 1e-3) return -0.5 + u / 6.0 - u * u * u / 180.0;
  if (u > 700.0) return 0.0;
  const double em1 = std::expm1(u);
  return (em1 - u * (em1 + 1.0)) / (em1 * em1);
}
}  // namespace detail

/// h'(v) / (h(v)(1-h(v))), the working-independence weight of one binomial
/// indicator. Equals e^v / (1 - exp(-e^v)).
inline double score_weight(double v) {
  const double e = std::exp(v);
  return e + detail::phi(e);
}

/// Derivative of score_weight with respect to v; score_weight(v) = e + phi(e), e = e^v.
inline double score_weight_prime(double v) {
  const double e = std::exp(v);
  return e + e * detail::phi_prime(e);
}

/// Binomial log-likelihood contribution y log h(v) + (m - y) log(1 - h(v))
/// for a (possibly fractional) response total y out of weight m.
inline double binomial_loglik(double y, double m, double v) {
  const double e = std::exp(v);
  return y * std::log(-std::expm1(-e)) - (m - y) * e;
}

}  // namespace cloglog
}  // namespace cifreg

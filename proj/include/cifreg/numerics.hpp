#pragma once

// Scalar numerical kernels: adaptive Gauss-Kronrod quadrature, Brent's root
// finder and plain bisection.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

#include "cifreg/errors.hpp"

namespace cifreg::numerics {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment kronrod15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double hl = 0.5 * (b - a);
  const double fc = f(c);
  double resk = fc * kWgk[7];
  double resg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = hl * kXgk[j];
    const double fsum = f(c - dx) + f(c + dx);
    resk += kWgk[j] * fsum;
    if (j % 2 == 1) resg += kWg[j / 2] * fsum;
  }
  return {a, b, resk * hl, std::abs((resk - resg) * hl)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over [a, b]. Refines the
/// interval with the largest error estimate until the summed estimate is
/// below max(abs_tol, rel_tol*|I|) or max_segments is reached.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double abs_tol = 1e-10,
                           double rel_tol = 1e-12, int max_segments = 2000) {
  QuadratureResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::Segment> heap;
  auto first = detail::kronrod15(f, a, b);
  heap.push(first);
  double total = first.value, err = first.error;
  int segments = 1;
  while (std::isfinite(err) && err > std::max(abs_tol, rel_tol * std::abs(total)) && segments < max_segments) {
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    auto left = detail::kronrod15(f, worst.a, mid);
    auto right = detail::kronrod15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++segments;
  }
  // Re-sum to shed accumulated round-off from the incremental updates.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.abs_error = err;
  out.evaluations = 15 * (2 * segments - 1);
  out.converged = std::isfinite(total) && std::isfinite(err) &&
                  err <= std::max(abs_tol, rel_tol * std::abs(total)) * 1.0000001;
  return out;
}

/// As integrate(), but throws NumericalError (with the achieved error) when
/// the tolerance is not met.
template <class F>
double integrate_or_throw(F&& f, double a, double b, double abs_tol = 1e-10,
                          double rel_tol = 1e-12) {
  auto r = integrate(std::forward<F>(f), a, b, abs_tol, rel_tol);
  if (!r.converged) {
    std::ostringstream os;
    os << "quadrature did not converge on [" << a << "," << b << "]: achieved error "
       << r.abs_error << " > tolerance " << abs_tol;
    throw NumericalError(os.str());
  }
  return r.value;
}

/// Integrates f over [0, b] after the substitution t = b v^m, which removes
/// an integrable t^{k-1} singularity at the origin when m >= 1/k.
template <class F>
double integrate_from_zero(F&& f, double b, double power, double abs_tol = 1e-10,
                           double rel_tol = 1e-12) {
  if (power <= 1.0) return integrate_or_throw(f, 0.0, b, abs_tol, rel_tol);
  auto g = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double vm1 = std::pow(v, power - 1.0);
    return f(b * vm1 * v) * power * b * vm1;
  };
  return integrate_or_throw(g, 0.0, 1.0, abs_tol, rel_tol);
}

struct RootResult {
  double root = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double bracket_lo = 0.0, bracket_hi = 0.0;
};

/// Brent's method on a bracket [a,b] with f(a) f(b) <= 0.
template <class F>
RootResult brent(F&& f, double a, double b, double xtol = 1e-14, int max_iter = 200) {
  double fa = f(a), fb = f(b);
  RootResult res{0.0, 0.0, 0, a, b};
  if (fa == 0.0) return {a, 0.0, 0, a, b};
  if (fb == 0.0) return {b, 0.0, 0, a, b};
  if ((fa > 0) == (fb > 0)) throw NumericalError("brent: root is not bracketed");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 1; it <= max_iter; ++it) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) {
      res.root = b;
      res.residual = fb;
      res.iterations = it;
      return res;
    }
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
    fb = f(b);
  }
  throw NumericalError("brent: maximum iterations exceeded");
}

/// Bisection for an increasing function: returns x in [lo, hi] with f(x) = 0
/// to absolute tolerance xtol.
template <class F>
double bisect_increasing(F&& f, double lo, double hi, double xtol) {
  for (int it = 0; it < 400 && hi - lo > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace cifreg::numerics

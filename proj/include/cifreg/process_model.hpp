#pragma once

// True competing-risks processes. IntensityModel specifies proportional
// (exponential or Weibull) cause-specific hazards; CifGenerativeModel specifies
// the cumulative incidence functions directly under the cloglog form. Both
// expose closed-form or quadrature-based marginal features.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cifreg/errors.hpp"
#include "cifreg/link.hpp"
#include "cifreg/numerics.hpp"

namespace cifreg {

/// Weibull hazard kappa * rate * (rate t)^(kappa-1) * exp(log_hr * X); kappa = 1 is exponential.
struct CauseIntensity {
  double shape = 1.0;
  double rate = 1.0;
  double log_hr = 0.0;
};

struct IntensityModel {
  std::array<CauseIntensity, 2> causes{};
  double tau = 1.0;

  const CauseIntensity& cause(int k) const { return causes.at(static_cast<std::size_t>(k - 1)); }

  void validate() const {
    for (const auto& c : causes) {
      if (!(c.shape > 0.0) || !std::isfinite(c.shape))
        throw ConfigError("IntensityModel: shape must be positive");
      if (!(c.rate >= 0.0) || !std::isfinite(c.rate))
        throw ConfigError("IntensityModel: rate must be non-negative");
      if (!std::isfinite(c.log_hr)) throw ConfigError("IntensityModel: log hazard ratio not finite");
    }
    if (causes[0].rate + causes[1].rate <= 0.0)
      throw ConfigError("IntensityModel: at least one cause needs a positive rate");
    if (!(tau > 0.0)) throw ConfigError("IntensityModel: tau must be positive");
  }

  bool exponential() const { return causes[0].shape == 1.0 && causes[1].shape == 1.0; }
  bool common_shape() const { return causes[0].shape == causes[1].shape; }

  double cumulative_hazard(int k, double t, int x) const {
    const auto& c = cause(k);
    if (t <= 0.0 || c.rate == 0.0) return 0.0;
    return std::pow(c.rate * t, c.shape) * std::exp(c.log_hr * x);
  }

  double survival(double t, int x) const {
    return std::exp(-cumulative_hazard(1, t, x) - cumulative_hazard(2, t, x));
  }
};

inline void check_arm(int x) {
  if (x != 0 && x != 1) throw DomainError("treatment indicator must be 0 or 1");
}

/// Cause-specific hazard lambda_0k(t | X).
inline double eval_intensity(const IntensityModel& m, double t, int x, int cause) {
  check_arm(x);
  if (cause != 1 && cause != 2) throw DomainError("eval_intensity: cause must be 1 or 2");
  if (!std::isfinite(t)) throw DomainError("eval_intensity: time must be finite");
  const auto& c = m.cause(cause);
  if (c.shape != 1.0 && t <= 0.0)
    throw DomainError("eval_intensity: Weibull hazard requires t > 0");
  if (c.rate == 0.0) return 0.0;
  const double base = c.shape == 1.0 ? c.rate : c.shape * c.rate * std::pow(c.rate * t, c.shape - 1.0);
  return base * std::exp(c.log_hr * x);
}

struct Marginals {
  double S = 1.0;   ///< event-free survival
  double F1 = 0.0;  ///< cumulative incidence of cause 1
  double F2 = 0.0;  ///< cumulative incidence of cause 2
};

enum class MarginalMethod { automatic, quadrature };

namespace detail {

// F1(t|x) = int_0^t lambda_01 S du, integrated on w = (rate1 u)^shape1 so the
// Weibull singularity at zero disappears: lambda_01 du = e^{g1 x} dw.
inline double cif1_quadrature(const IntensityModel& m, double t, int x) {
  const auto& c1 = m.cause(1);
  const auto& c2 = m.cause(2);
  if (t <= 0.0 || c1.rate == 0.0) return 0.0;
  const double e1 = std::exp(c1.log_hr * x);
  const double e2 = std::exp(c2.log_hr * x);
  const double wmax = std::pow(c1.rate * t, c1.shape);
  auto integrand = [&](double w) {
    const double u = std::pow(w, 1.0 / c1.shape) / c1.rate;
    const double h2 = c2.rate == 0.0 ? 0.0 : std::pow(c2.rate * u, c2.shape) * e2;
    return std::exp(-e1 * w - h2);
  };
  return e1 * numerics::integrate_or_throw(integrand, 0.0, wmax, 1e-13, 1e-13);
}

}  // namespace detail

/// (S, F1, F2) at time t. The cause-1 incidence is closed form when both
/// causes share the Weibull shape and uses adaptive quadrature otherwise.
inline Marginals eval_marginals(const IntensityModel& m, double t, int x,
                                MarginalMethod method = MarginalMethod::automatic) {
  check_arm(x);
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("eval_marginals: t must be finite and >= 0");
  if (t == 0.0) return {1.0, 0.0, 0.0};
  Marginals out;
  const double h1 = m.cumulative_hazard(1, t, x);
  const double h2 = m.cumulative_hazard(2, t, x);
  out.S = std::exp(-h1 - h2);
  const double one_minus_s = -std::expm1(-h1 - h2);
  if (method == MarginalMethod::automatic && m.common_shape()) {
    // Hazard ratio between causes is constant in t.
    out.F1 = (h1 + h2) > 0.0 ? one_minus_s * h1 / (h1 + h2) : 0.0;
  } else {
    out.F1 = detail::cif1_quadrature(m, t, x);
  }
  out.F2 = one_minus_s - out.F1;
  return out;
}

/// Cause-1 subdensity f1(t|X) = lambda_01(t|X) S(t|X).
inline double subdensity1(const IntensityModel& m, double t, int x) {
  if (t <= 0.0 && m.cause(1).shape != 1.0) return m.cause(1).shape < 1.0 ? INFINITY : 0.0;
  return eval_intensity(m, std::max(t, 0.0), x, 1) * m.survival(t, x);
}

struct BaselineRates {
  double rate1 = 0.0;
  double rate2 = 0.0;
};

/// Baseline rates such that P(T <= tau | X=0) = p_event and
/// P(T1 < T2 | T <= tau, X=0) = p_cause1.
inline BaselineRates calibrate_baseline(double p_event, double p_cause1, double shape1,
                                        double shape2, double tau) {
  if (!(p_event > 0.0 && p_event < 1.0) || !(p_cause1 > 0.0 && p_cause1 < 1.0))
    throw DomainError("calibrate_baseline: probabilities must lie in (0,1)");
  if (!(shape1 > 0.0) || !(shape2 > 0.0) || !(tau > 0.0))
    throw DomainError("calibrate_baseline: shapes and tau must be positive");
  const double total = -std::log1p(-p_event);  // H1(tau) + H2(tau)
  if (shape1 == shape2) {
    return {std::pow(p_cause1 * total, 1.0 / shape1) / tau,
            std::pow((1.0 - p_cause1) * total, 1.0 / shape2) / tau};
  }
  // Along the constraint H1(tau)+H2(tau)=total, rate2 follows from rate1 in
  // closed form; the outer solve on rate1 matches the cause-1 share.
  auto rate2_of = [&](double r1) {
    const double rest = total - std::pow(r1 * tau, shape1);
    return rest > 0.0 ? std::pow(rest, 1.0 / shape2) / tau : 0.0;
  };
  auto share_gap = [&](double r1) {
    IntensityModel m;
    m.causes = {CauseIntensity{shape1, r1, 0.0}, CauseIntensity{shape2, rate2_of(r1), 0.0}};
    m.tau = tau;
    return eval_marginals(m, tau, 0).F1 / p_event - p_cause1;
  };
  const double r1_max = std::pow(total, 1.0 / shape1) / tau;
  try {
    auto root = numerics::brent(share_gap, r1_max * 1e-12, r1_max * (1.0 - 1e-12), 1e-15);
    return {root.root, rate2_of(root.root)};
  } catch (const NumericalError& e) {
    throw CalibrationError(std::string("calibrate_baseline: ") + e.what());
  }
}

/// Exponential/Weibull truth calibrated so that P(T <= tau | X=0) = p_event and
/// P(T1 < T2 | T <= tau, X=0) = p_cause1, with treatment hazard ratios exp_g1, exp_g2.
inline IntensityModel make_intensity_model(double p_event, double p_cause1, double exp_g1,
                                           double exp_g2, double shape1 = 1.0,
                                           double shape2 = 1.0, double tau = 1.0) {
  if (!(exp_g1 > 0.0) || !(exp_g2 > 0.0)) throw DomainError("hazard ratios must be positive");
  auto rates = calibrate_baseline(p_event, p_cause1, shape1, shape2, tau);
  IntensityModel m;
  m.causes = {CauseIntensity{shape1, rates.rate1, std::log(exp_g1)},
              CauseIntensity{shape2, rates.rate2, std::log(exp_g2)}};
  m.tau = tau;
  m.validate();
  return m;
}

enum class CifVariant { beyersmann, extended };

/// Cloglog-CIF truth with psi_1(t) = psi_2(t) = t:
///   F1(t|X) = 1 - (1 - q(1 - e^{-t}))^{exp(beta X)}
///   F2(t|X) = (1 - F1(inf|X)) h(log t + beta2 X)
/// The Beyersmann variant has no free beta2; it coincides with beta2 = beta.
struct CifGenerativeModel {
  double q = 0.5;
  double beta = 0.0;
  std::optional<double> beta2;
  CifVariant variant = CifVariant::extended;

  void validate() const {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("CifGenerativeModel: q must lie in (0,1)");
    if (!std::isfinite(beta)) throw ConfigError("CifGenerativeModel: beta not finite");
    if (variant == CifVariant::beyersmann && beta2)
      throw ConfigError("CifGenerativeModel: beta2 is not a free parameter of the Beyersmann model");
    if (beta2 && !std::isfinite(*beta2)) throw ConfigError("CifGenerativeModel: beta2 not finite");
  }

  double effective_beta2() const {
    return variant == CifVariant::beyersmann ? beta : beta2.value_or(0.0);
  }

  /// F1(inf | X)
  double cif1_limit(int x) const { return -std::expm1(std::exp(beta * x) * std::log1p(-q)); }
};

/// q giving F1(tau | X=0) = target under psi_1(t) = t.
inline double cif_q_for_incidence(double f1_at_tau, double tau = 1.0) {
  const double q = f1_at_tau / -std::expm1(-tau);
  if (!(q > 0.0 && q < 1.0)) throw DomainError("cif_q_for_incidence: target not attainable");
  return q;
}

struct CifValues {
  double F1 = 0.0, F2 = 0.0, f1 = 0.0, f2 = 0.0;
};

inline CifValues eval_cif_model(const CifGenerativeModel& m, double t, int x) {
  check_arm(x);
  m.validate();
  if (!(t >= 0.0)) throw DomainError("eval_cif_model: t must be >= 0");
  const double eb = std::exp(m.beta * x);
  const double eb2 = std::exp(m.effective_beta2() * x);
  const double one_minus_e = -std::expm1(-t);  // psi(t)=t
  const double base = 1.0 - m.q * one_minus_e;  // 1 - F1(t|0)
  CifValues v;
  v.F1 = -std::expm1(eb * std::log(base));
  v.f1 = eb * std::pow(base, eb - 1.0) * m.q * std::exp(-t);
  const double mass2 = std::exp(eb * std::log1p(-m.q));  // 1 - F1(inf|X)
  v.F2 = mass2 * -std::expm1(-t * eb2);
  v.f2 = mass2 * eb2 * std::exp(-t * eb2);
  return v;
}

/// Either truth family.
using Truth = std::variant<IntensityModel, CifGenerativeModel>;

inline double truth_cif1(const Truth& truth, double t, int x) {
  if (const auto* im = std::get_if<IntensityModel>(&truth)) return eval_marginals(*im, t, x).F1;
  return eval_cif_model(std::get<CifGenerativeModel>(truth), t, x).F1;
}

inline double truth_subdensity1(const Truth& truth, double t, int x) {
  if (const auto* im = std::get_if<IntensityModel>(&truth)) return subdensity1(*im, t, x);
  return eval_cif_model(std::get<CifGenerativeModel>(truth), t, x).f1;
}

/// Smallest Weibull shape of cause 1, used to pick a singularity-removing
/// substitution when integrating the cause-1 subdensity from zero.
inline double truth_cause1_shape(const Truth& truth) {
  if (const auto* im = std::get_if<IntensityModel>(&truth)) return im->cause(1).shape;
  return 1.0;
}

struct AdequacyCurve {
  std::vector<double> time;
  std::vector<double> value;     ///< g(F1(t|1)) - g(F1(t|0))
  std::vector<double> skipped;   ///< grid points where F1 = 0
};

/// Pointwise cloglog difference between arms; a constant curve means the
/// cloglog proportional model holds exactly.
inline AdequacyCurve adequacy_curve(const IntensityModel& m, const std::vector<double>& grid) {
  AdequacyCurve out;
  for (double t : grid) {
    if (!(t > 0.0) || t > m.tau) throw DomainError("adequacy_curve: grid must lie in (0, tau]");
    const double f0 = eval_marginals(m, t, 0).F1;
    const double f1 = eval_marginals(m, t, 1).F1;
    if (f0 <= 0.0 || f1 <= 0.0 || f0 >= 1.0 || f1 >= 1.0) {
      out.skipped.push_back(t);
      continue;
    }
    out.time.push_back(t);
    out.value.push_back(cloglog::g(f1) - cloglog::g(f0));
  }
  return out;
}

}  // namespace cifreg

#pragma once

// Simulation of right-censored competing-risks data from either truth family,
// with exponential random loss to follow-up and administrative censoring at tau.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cifreg/errors.hpp"
#include "cifreg/numerics.hpp"
#include "cifreg/process_model.hpp"
#include "cifreg/rng.hpp"

namespace cifreg {

/// status: 0 censored, 1 cause-1 event, 2 cause-2 event.
struct SubjectRecord {
  int id = 0;
  double time = 0.0;
  int status = 0;
  int x = 0;

  bool operator==(const SubjectRecord&) const = default;
};

/// A sample together with its administrative horizon.
struct Dataset {
  std::vector<SubjectRecord> records;
  double tau = 1.0;

  std::size_t size() const { return records.size(); }
};

/// C_r ~ Exp(rate); rate = 0 leaves only administrative censoring at tau.
struct CensoringSpec {
  double rate = 0.0;
  double tau = 1.0;
};

struct EventDraw {
  double time = 0.0;
  int cause = 1;
};

/// Total-hazard inversion followed by a cause draw with probability
/// lambda_01 / (lambda_01 + lambda_02) at the event time.
inline EventDraw draw_intensity_path(const IntensityModel& m, int x, RandomStream& rng) {
  check_arm(x);
  const double target = -std::log(rng.uniform());  // H(T) = -log U
  double t;
  if (m.exponential()) {
    const double total = m.causes[0].rate * std::exp(m.causes[0].log_hr * x) +
                         m.causes[1].rate * std::exp(m.causes[1].log_hr * x);
    t = target / total;
  } else {
    auto gap = [&](double s) {
      return m.cumulative_hazard(1, s, x) + m.cumulative_hazard(2, s, x) - target;
    };
    double hi = 1.0;
    while (gap(hi) < 0.0) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) < 0.0 ? lo : hi) = mid;
    }
    t = 0.5 * (lo + hi);
  }
  const double l1 = eval_intensity(m, t, x, 1);
  const double l2 = eval_intensity(m, t, x, 2);
  const double u = rng.uniform();
  return {t, (l2 == 0.0 || u < l1 / (l1 + l2)) ? 1 : 2};
}

/// Solves F1(t|x) + F2(t|x) = u by bisection; returns NaN when u exceeds the
/// mass reachable before t = 1e6.
inline double invert_cif_total(const CifGenerativeModel& m, int x, double u) {
  auto total = [&](double t) {
    const auto v = eval_cif_model(m, t, x);
    return v.F1 + v.F2;
  };
  double hi = 1.0;
  while (total(hi) < u) {
    hi *= 2.0;
    if (hi > 1e6) return std::numeric_limits<double>::quiet_NaN();
  }
  return numerics::bisect_increasing([&](double t) { return total(t) - u; }, 0.0, hi, 1e-13);
}

inline EventDraw draw_cif_path(const CifGenerativeModel& m, int x, RandomStream& rng) {
  check_arm(x);
  for (;;) {
    const double t = invert_cif_total(m, x, rng.uniform());
    if (std::isnan(t) || t <= 0.0) continue;  // probability-zero tail; redraw
    const auto v = eval_cif_model(m, t, x);
    const double u = rng.uniform();
    return {t, u < v.f1 / (v.f1 + v.f2) ? 1 : 2};
  }
}

inline EventDraw draw_path(const Truth& truth, int x, RandomStream& rng) {
  if (const auto* im = std::get_if<IntensityModel>(&truth)) return draw_intensity_path(*im, x, rng);
  return draw_cif_path(std::get<CifGenerativeModel>(truth), x, rng);
}

/// pi_r(rho) = E_X[int_0^tau (1 - e^{-rho t}) f1(t|X) dt] / E_X[F1(tau|X)].
inline double censored_event_fraction(const Truth& truth, double rho, double tau,
                                       double p_x1 = 0.5) {
  const double shape = truth_cause1_shape(truth);
  const double power = shape < 1.0 ? 1.0 / shape : 1.0;
  double num = 0.0, den = 0.0;
  for (int x = 0; x <= 1; ++x) {
    const double px = x == 1 ? p_x1 : 1.0 - p_x1;
    auto integrand = [&](double t) { return -std::expm1(-rho * t) * truth_subdensity1(truth, t, x); };
    num += px * numerics::integrate_from_zero(integrand, tau, power, 1e-12, 1e-12);
    den += px * truth_cif1(truth, tau, x);
  }
  return num / den;
}

/// Exponential censoring rate rho giving P(C_r < T1 | T1 <= min(T2, tau)) = target.
inline double calibrate_censoring_rate(const Truth& truth, double target, double tau,
                                       double p_x1 = 0.5) {
  if (!(target >= 0.0 && target < 1.0))
    throw DomainError("calibrate_censoring_rate: target must lie in [0,1)");
  if (target == 0.0) return 0.0;
  auto gap = [&](double rho) { return censored_event_fraction(truth, rho, tau, p_x1) - target; };
  double hi = 1.0;
  while (gap(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw CalibrationError("calibrate_censoring_rate: target unreachable");
  }
  return numerics::brent(gap, 0.0, hi, 1e-14).root;
}

/// n subjects with X ~ Bernoulli(p_x1). Subject i draws from the stream
/// (seed, replicate, i) so the sample is reproducible regardless of threading.
inline Dataset generate_dataset(const Truth& truth, int n, const CensoringSpec& censoring,
                                std::uint64_t seed, std::uint64_t replicate = 0,
                                double p_x1 = 0.5) {
  if (n < 1) throw DomainError("generate_dataset: n must be >= 1");
  if (!(censoring.rate >= 0.0) || !(censoring.tau > 0.0))
    throw DomainError("generate_dataset: invalid censoring specification");
  Dataset data;
  data.tau = censoring.tau;
  data.records.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RandomStream rng(seed, replicate, static_cast<std::uint64_t>(i));
    const int x = rng.uniform() < p_x1 ? 1 : 0;
    const double c_random = censoring.rate > 0.0 ? -std::log(rng.uniform()) / censoring.rate
                                                 : std::numeric_limits<double>::infinity();
    const EventDraw ev = draw_path(truth, x, rng);
    const double c = std::min(c_random, censoring.tau);
    SubjectRecord rec{i + 1, 0.0, 0, x};
    if (ev.time <= c) {  // ties go to the event
      rec.time = ev.time;
      rec.status = ev.cause;
    } else {
      rec.time = c;
      rec.status = 0;
    }
    data.records.push_back(rec);
  }
  return data;
}

inline void validate(const Dataset& data) {
  if (data.records.empty()) throw DomainError("dataset is empty");
  for (const auto& r : data.records) {
    if (!(r.time > 0.0) || !std::isfinite(r.time)) throw DomainError("dataset: times must be > 0");
    if (r.status < 0 || r.status > 2) throw DomainError("dataset: status must be 0, 1 or 2");
    if (r.x != 0 && r.x != 1) throw DomainError("dataset: x must be 0 or 1");
  }
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with header id,time,status,x.
inline void write_csv(std::ostream& os, const Dataset& data) {
  os << "id,time,status,x\n";
  for (const auto& r : data.records)
    os << r.id << ',' << format_double(r.time) << ',' << r.status << ',' << r.x << '\n';
}

inline Dataset read_csv(std::istream& is, double tau) {
  Dataset data;
  data.tau = tau;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,time,status,x") throw ConfigError("dataset CSV header must be id,time,status,x");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    SubjectRecord r;
    char c1, c2, c3;
    if (!(ls >> r.id >> c1 >> r.time >> c2 >> r.status >> c3 >> r.x) || c1 != ',' || c2 != ',' ||
        c3 != ',')
      throw ConfigError("dataset CSV: malformed line " + std::to_string(lineno));
    data.records.push_back(r);
  }
  validate(data);
  return data;
}

}  // namespace cifreg

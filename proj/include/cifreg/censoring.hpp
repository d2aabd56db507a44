#pragma once

// Kaplan-Meier estimation of the random-censoring survivor G(t) = P(C_r > t),
// optionally stratified by arm, and the inverse-probability-of-censoring
// weights built from it.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "cifreg/datagen.hpp"
#include "cifreg/errors.hpp"

namespace cifreg {

inline constexpr double kMinCensoringSurvival = 1e-10;

/// Left-continuous product-limit step function: value(t) multiplies the
/// factors of all jumps strictly before t.
struct KmCurve {
  std::vector<double> jump_times;  ///< distinct random-censoring times, ascending
  std::vector<double> survival;    ///< G just after each jump
  std::vector<double> at_risk;     ///< Y(u) at each jump
  std::vector<double> hazard;      ///< increment d/Y at each jump
  std::optional<int> stratum;

  double operator()(double t) const {
    const auto k = std::lower_bound(jump_times.begin(), jump_times.end(), t) - jump_times.begin();
    return k == 0 ? 1.0 : survival[static_cast<std::size_t>(k - 1)];
  }

  /// Number of jumps at or before t.
  std::size_t jumps_through(double t) const {
    return static_cast<std::size_t>(std::upper_bound(jump_times.begin(), jump_times.end(), t) -
                                    jump_times.begin());
  }
};

/// Record censored by loss to follow-up (status 0 strictly before tau).
inline bool randomly_censored(const SubjectRecord& r, double tau) {
  return r.status == 0 && r.time < tau * (1.0 - 1e-12);
}

namespace detail {

inline KmCurve product_limit(const std::vector<const SubjectRecord*>& subjects, double tau) {
  KmCurve km;
  std::vector<double> all, cens;
  all.reserve(subjects.size());
  for (const auto* r : subjects) {
    all.push_back(r->time);
    if (randomly_censored(*r, tau)) cens.push_back(r->time);
  }
  std::sort(all.begin(), all.end());
  std::sort(cens.begin(), cens.end());
  double g = 1.0;
  for (std::size_t i = 0; i < cens.size();) {
    std::size_t j = i;
    while (j < cens.size() && cens[j] == cens[i]) ++j;
    const double d = static_cast<double>(j - i);
    const double y = static_cast<double>(all.end() - std::lower_bound(all.begin(), all.end(), cens[i]));
    g *= 1.0 - d / y;
    km.jump_times.push_back(cens[i]);
    km.survival.push_back(g);
    km.at_risk.push_back(y);
    km.hazard.push_back(d / y);
    i = j;
  }
  return km;
}

}  // namespace detail

/// Censoring survivor estimate, pooled or one curve per arm.
struct CensoringModel {
  bool stratified = false;
  std::vector<KmCurve> curves;  ///< one curve, or curves[x] for x in {0,1}
  double tau = 1.0;

  const KmCurve& curve_for(int x) const { return stratified ? curves.at(static_cast<std::size_t>(x)) : curves.front(); }
  double survival(int x, double t) const { return curve_for(x)(t); }
  int strata() const { return stratified ? 2 : 1; }
  int stratum_of(int x) const { return stratified ? x : 0; }
};

/// Kaplan-Meier estimate of G treating loss to follow-up as the event; events
/// of either cause and administrative censoring at tau censor C_r.
inline CensoringModel km_censoring(const Dataset& data, bool stratify_by_x = false) {
  validate(data);
  CensoringModel model;
  model.stratified = stratify_by_x;
  model.tau = data.tau;
  if (!stratify_by_x) {
    std::vector<const SubjectRecord*> all;
    for (const auto& r : data.records) all.push_back(&r);
    model.curves.push_back(detail::product_limit(all, data.tau));
  } else {
    for (int x = 0; x <= 1; ++x) {
      std::vector<const SubjectRecord*> arm;
      for (const auto& r : data.records)
        if (r.x == x) arm.push_back(&r);
      model.curves.push_back(detail::product_limit(arm, data.tau));
      model.curves.back().stratum = x;
    }
  }
  return model;
}

inline double checked_inverse(double g) {
  if (g < kMinCensoringSurvival)
    throw WeightOverflowError("censoring survivor estimate vanished where a weight was required");
  return 1.0 / g;
}

/// w_i(t) = 1(t <= tau) 1(C_i > min(T_i, t)) / G(min(T_i, t)).
inline double ipcw_weight(const CensoringModel& g, const SubjectRecord& r, double t) {
  if (t > g.tau) return 0.0;
  if (r.status == 0) {
    // Censored at r.time: still under observation only strictly before it.
    if (t >= r.time) return 0.0;
    return checked_inverse(g.survival(r.x, t));
  }
  return checked_inverse(g.survival(r.x, std::min(r.time, t)));
}

/// Weighted response 1(C_i >= min(T_i, s)) N_1i(s) / G(min(T_i, s)).
inline double weighted_response(const CensoringModel& g, const SubjectRecord& r, double s) {
  if (s > g.tau) throw DomainError("weighted_response: evaluation time beyond tau");
  if (r.status != 1 || r.time > s) return 0.0;
  return checked_inverse(g.survival(r.x, r.time));
}

/// Per-subject influence of estimating G on a statistic whose linearization in
/// G is sum_k Q_k dLambda-martingale terms, i.e. for subject j
///   sum_k Q_k / Y_k (dN^c_j(u_k) - Y_j(u_k) dLambda_k),
/// with u_k the jumps of the subject's stratum curve. Q must have one entry per jump.
inline std::vector<Eigen::VectorXd> censoring_correction(
    const CensoringModel& g, const Dataset& data, const std::vector<std::vector<Eigen::VectorXd>>& q_by_stratum,
    int dim) {
  std::vector<Eigen::VectorXd> out(data.size(), Eigen::VectorXd::Zero(dim));
  for (int s = 0; s < g.strata(); ++s) {
    const KmCurve& km = g.curves[static_cast<std::size_t>(s)];
    const auto& q = q_by_stratum[static_cast<std::size_t>(s)];
    if (q.size() != km.jump_times.size()) throw DomainError("censoring_correction: Q size mismatch");
    std::vector<Eigen::VectorXd> cum(km.jump_times.size() + 1, Eigen::VectorXd::Zero(dim));
    for (std::size_t k = 0; k < km.jump_times.size(); ++k)
      cum[k + 1] = cum[k] + q[k] * (km.hazard[k] / km.at_risk[k]);
    for (std::size_t j = 0; j < data.size(); ++j) {
      const auto& r = data.records[j];
      if (g.stratum_of(r.x) != s) continue;
      const std::size_t through = km.jumps_through(r.time);
      out[j] -= cum[through];
      if (randomly_censored(r, g.tau) && through > 0 && km.jump_times[through - 1] == r.time)
        out[j] += q[through - 1] / km.at_risk[through - 1];
    }
  }
  return out;
}

/// Diagnostic dump of a curve as time,value rows.
inline void write_curve_csv(std::ostream& os, const KmCurve& km) {
  os << "time,value\n";
  os << "0,1\n";
  for (std::size_t k = 0; k < km.jump_times.size(); ++k)
    os << format_double(km.jump_times[k]) << ',' << format_double(km.survival[k]) << '\n';
}

}  // namespace cifreg

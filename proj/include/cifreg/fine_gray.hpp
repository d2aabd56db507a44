#pragma once

// Fine-Gray regression of the cloglog cumulative incidence model
//   F1(t|X) = 1 - exp(-Gamma(t) exp(beta X)).
// Competing-event subjects stay in the risk set with the stabilized weight
// G(t)/G(T_k), so subjects still under observation contribute weight one.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cifreg/censoring.hpp"
#include "cifreg/datagen.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/link.hpp"
#include "cifreg/rng.hpp"
#include "cifreg/two_arm_ph.hpp"

namespace cifreg {

/// Step function with increments at the observed cause-1 event times.
struct BreslowCurve {
  std::vector<double> time;
  std::vector<double> increment;

  double operator()(double t) const {
    double s = 0.0;
    for (std::size_t j = 0; j < time.size() && time[j] <= t; ++j) s += increment[j];
    return s;
  }
};

struct ConvergenceInfo {
  int iterations = 0;
  double score_norm = 0.0;
};

struct FgFit {
  double beta_hat = 0.0;
  double se_naive = 0.0;
  double se_robust = 0.0;
  BreslowCurve breslow;
  ConvergenceInfo convergence;
  int n_events = 0;
  double tau = 1.0;
};

enum class TimeFunction { t, log_t };

inline double eval_time_function(TimeFunction b, double t) { return b == TimeFunction::t ? t : std::log(t); }

/// Fit of beta(t) = beta + nu b(t).
struct FgExtendedFit {
  double beta_hat = 0.0;
  double nu_hat = 0.0;
  TimeFunction b_spec = TimeFunction::t;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  BreslowCurve breslow;
  ConvergenceInfo convergence;
  int n_events = 0;
};

namespace detail {

/// Sorted per-arm summaries shared by the fit and its influence functions.
struct FgDesign {
  RiskTable table;
  std::array<std::vector<double>, 2> arm_times;      ///< all observed times, sorted
  std::array<std::vector<double>, 2> compete_times;  ///< cause-2 times, sorted
  std::array<std::vector<double>, 2> compete_cum;    ///< prefix sums of 1/G(T_k), size +1
  std::array<std::vector<double>, 2> g_at_event;     ///< G_x(t_j)
};

inline FgDesign build_fg_design(const Dataset& data, const CensoringModel& cens, int cause = 1,
                                bool keep_competing = true) {
  validate(data);
  FgDesign d;
  std::vector<double> ev;
  for (const auto& r : data.records) {
    d.arm_times[r.x].push_back(r.time);
    if (r.status == cause) ev.push_back(r.time);
    else if (keep_competing && r.status != 0) d.compete_times[r.x].push_back(r.time);
  }
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
  d.table.resize(ev.size());
  d.table.time = ev;
  for (const auto& r : data.records) {
    if (r.status != cause) continue;
    const auto j = static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), r.time) - ev.begin());
    d.table.events[r.x][j] += 1.0;
  }
  for (int x = 0; x < 2; ++x) {
    auto& at = d.arm_times[x];
    auto& ct = d.compete_times[x];
    std::sort(at.begin(), at.end());
    std::sort(ct.begin(), ct.end());
    d.compete_cum[x].assign(ct.size() + 1, 0.0);
    for (std::size_t k = 0; k < ct.size(); ++k)
      d.compete_cum[x][k + 1] = d.compete_cum[x][k] + checked_inverse(cens.survival(x, ct[k]));
    d.g_at_event[x].resize(ev.size());
    for (std::size_t j = 0; j < ev.size(); ++j) {
      const double t = ev[j];
      const double at_risk = static_cast<double>(at.end() - std::lower_bound(at.begin(), at.end(), t));
      const auto before = static_cast<std::size_t>(std::lower_bound(ct.begin(), ct.end(), t) - ct.begin());
      const double gx = keep_competing ? cens.survival(x, t) : 1.0;
      d.g_at_event[x][j] = gx;
      d.table.weight[x][j] = at_risk + gx * d.compete_cum[x][before];
    }
  }
  return d;
}

inline void require_two_arm_events(const RiskTable& rt) {
  if (rt.total_events(0) == 0.0 || rt.total_events(1) == 0.0)
    throw FitError("non-identifiable: a treatment arm has no events of the analysed cause");
}

inline Eigen::MatrixXd fg_covariates(const RiskTable& rt, std::optional<TimeFunction> b) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(rt.size()), b ? 2 : 1);
  for (std::size_t j = 0; j < rt.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    c(r, 0) = 1.0;
    if (b) c(r, 1) = eval_time_function(*b, rt.time[j]);
  }
  return c;
}

inline BreslowCurve breslow_from(const RiskTable& rt, const PhTerms& t) {
  BreslowCurve b;
  b.time = rt.time;
  b.increment = t.dgamma;
  return b;
}

/// Per-subject influence terms of the pseudo-score at theta, including the
/// correction for estimating G. Rows sum to the score.
inline Eigen::MatrixXd fg_influence(const FgDesign& d, const Eigen::MatrixXd& cov, const Eigen::VectorXd& theta,
                                    const Dataset& data, const CensoringModel& cens, int cause = 1) {
  const RiskTable& rt = d.table;
  const std::size_t m = rt.size();
  const auto p = cov.cols();
  const PhTerms t = ph_terms(rt, cov, theta);
  // g_x(t_j) = exp(theta' z_x) (z_x - E(t_j)) dGamma(t_j)
  std::array<std::vector<Eigen::VectorXd>, 2> g;
  std::vector<Eigen::VectorXd> ebar(m);
  for (int x = 0; x < 2; ++x) g[x].resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::VectorXd c = cov.row(static_cast<Eigen::Index>(j)).transpose();
    ebar[j] = t.p1[j] * c;
    g[0][j] = -ebar[j] * t.dgamma[j];
    g[1][j] = t.rel_risk1[j] * (c - ebar[j]) * t.dgamma[j];
  }
  std::array<std::vector<Eigen::VectorXd>, 2> prefix, gsuffix;
  for (int x = 0; x < 2; ++x) {
    prefix[x].assign(m + 1, Eigen::VectorXd::Zero(p));
    gsuffix[x].assign(m + 1, Eigen::VectorXd::Zero(p));
    for (std::size_t j = 0; j < m; ++j) prefix[x][j + 1] = prefix[x][j] + g[x][j];
    for (std::size_t j = m; j-- > 0;) gsuffix[x][j] = gsuffix[x][j + 1] + d.g_at_event[x][j] * g[x][j];
  }
  const auto events_through = [&](double u) {
    return static_cast<std::size_t>(std::upper_bound(rt.time.begin(), rt.time.end(), u) - rt.time.begin());
  };

  Eigen::MatrixXd eta(static_cast<Eigen::Index>(data.size()), p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    const std::size_t through = events_through(r.time);
    Eigen::VectorXd e = -prefix[r.x][through];
    if (r.status == cause) {
      const std::size_t j = through - 1;
      const Eigen::VectorXd c = cov.row(static_cast<Eigen::Index>(j)).transpose();
      e += (r.x == 1 ? c : Eigen::VectorXd::Zero(p)) - ebar[j];
    } else if (r.status != 0) {
      e -= gsuffix[r.x][through] * checked_inverse(cens.survival(r.x, r.time));
    }
    eta.row(static_cast<Eigen::Index>(i)) = e.transpose();
  }

  // Q(u) = sum_x [sum_{cause-2 k in x, T_k <= u} 1/G(T_k)] [sum_{t_j > u} G(t_j) g_x(t_j)]
  std::vector<std::vector<Eigen::VectorXd>> q(static_cast<std::size_t>(cens.strata()));
  for (int s = 0; s < cens.strata(); ++s) {
    const KmCurve& km = cens.curves[static_cast<std::size_t>(s)];
    auto& qs = q[static_cast<std::size_t>(s)];
    qs.assign(km.jump_times.size(), Eigen::VectorXd::Zero(p));
    for (int x = 0; x < 2; ++x) {
      if (cens.stratum_of(x) != s) continue;
      const auto& ct = d.compete_times[x];
      for (std::size_t k = 0; k < km.jump_times.size(); ++k) {
        const double u = km.jump_times[k];
        const auto upto = static_cast<std::size_t>(std::upper_bound(ct.begin(), ct.end(), u) - ct.begin());
        qs[k] += d.compete_cum[x][upto] * gsuffix[x][events_through(u)];
      }
    }
  }
  const auto corr = censoring_correction(cens, data, q, static_cast<int>(p));
  for (std::size_t i = 0; i < data.size(); ++i) eta.row(static_cast<Eigen::Index>(i)) += corr[i].transpose();
  return eta;
}

inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& information, const Eigen::MatrixXd& influence) {
  const Eigen::MatrixXd inv = information.inverse();
  return inv * (influence.transpose() * influence) * inv;
}

inline Dataset resample(const Dataset& data, RandomStream& rng) {
  Dataset b;
  b.tau = data.tau;
  b.records.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    SubjectRecord r = data.records[rng.below(data.size())];
    r.id = static_cast<int>(i) + 1;
    b.records.push_back(r);
  }
  return b;
}

template <class Statistic>
std::vector<Eigen::VectorXd> bootstrap_replicates(const Dataset& data, int n_boot, std::uint64_t seed,
                                                  Statistic&& stat, int max_retries = 10) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(n_boot));
  for (int b = 0; b < n_boot; ++b) {
    for (int attempt = 0;; ++attempt) {
      RandomStream rng(seed, 0xb0075ULL + static_cast<std::uint64_t>(attempt), static_cast<std::uint64_t>(b));
      try {
        out.push_back(stat(resample(data, rng)));
        break;
      } catch (const NumericalError&) {
        if (attempt + 1 >= max_retries) throw FitError("bootstrap resample non-identifiable after retries");
      }
    }
  }
  return out;
}

inline Eigen::MatrixXd sample_covariance(const std::vector<Eigen::VectorXd>& v) {
  if (v.size() < 2) throw NumericalError("at least two bootstrap replicates are needed");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(v.front().size());
  for (const auto& e : v) mean += e;
  mean /= static_cast<double>(v.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
  for (const auto& e : v) cov += (e - mean) * (e - mean).transpose();
  return cov / static_cast<double>(v.size() - 1);
}

}  // namespace detail

/// Fine-Gray fit of the time-constant model with influence-function robust SE.
inline FgFit fg_fit(const Dataset& data, const CensoringModel& censoring) {
  const detail::FgDesign d = detail::build_fg_design(data, censoring);
  detail::require_two_arm_events(d.table);
  const Eigen::MatrixXd cov = detail::fg_covariates(d.table, std::nullopt);
  const PhSolution sol = solve_two_arm_ph(d.table, cov);
  FgFit fit;
  fit.beta_hat = sol.theta(0);
  fit.se_naive = std::sqrt(1.0 / sol.information(0, 0));
  const Eigen::MatrixXd eta = detail::fg_influence(d, cov, sol.theta, data, censoring);
  fit.se_robust = std::sqrt(detail::sandwich(sol.information, eta)(0, 0));
  fit.breslow = detail::breslow_from(d.table, ph_terms(d.table, cov, sol.theta));
  fit.convergence = {sol.iterations, sol.score_norm};
  fit.n_events = static_cast<int>(d.table.total_events(0) + d.table.total_events(1));
  fit.tau = data.tau;
  return fit;
}

inline FgFit fg_fit(const Dataset& data, bool stratify_censoring = false) {
  return fg_fit(data, km_censoring(data, stratify_censoring));
}

enum class VarianceMethod { influence, bootstrap };

/// Robust SE of beta_hat, by influence functions or by a subject bootstrap
/// that re-estimates G in each resample.
inline double fg_robust_variance(const FgFit& fit, const Dataset& data, const CensoringModel& censoring,
                                 VarianceMethod method = VarianceMethod::influence, int n_boot = 500,
                                 std::uint64_t seed = 1) {
  if (method == VarianceMethod::influence) return fit.se_robust;
  const bool strat = censoring.stratified;
  const auto reps = detail::bootstrap_replicates(data, n_boot, seed, [&](const Dataset& b) {
    Eigen::VectorXd v(1);
    v(0) = fg_fit(b, km_censoring(b, strat)).beta_hat;
    return v;
  });
  return std::sqrt(detail::sample_covariance(reps)(0, 0));
}

/// Fit with covariate vector (X, b(t) X).
inline FgExtendedFit fg_fit_extended(const Dataset& data, const CensoringModel& censoring, TimeFunction b_spec) {
  const detail::FgDesign d = detail::build_fg_design(data, censoring);
  detail::require_two_arm_events(d.table);
  const Eigen::MatrixXd cov = detail::fg_covariates(d.table, b_spec);
  const auto col = cov.col(1);
  if (col.maxCoeff() - col.minCoeff() <= 1e-12 * std::max(1.0, col.cwiseAbs().maxCoeff()))
    throw FitError("b(t) is constant over the event times; nu is not identifiable");
  const PhSolution sol = solve_two_arm_ph(d.table, cov);
  FgExtendedFit fit;
  fit.beta_hat = sol.theta(0);
  fit.nu_hat = sol.theta(1);
  fit.b_spec = b_spec;
  fit.covariance = detail::sandwich(sol.information, detail::fg_influence(d, cov, sol.theta, data, censoring));
  fit.breslow = detail::breslow_from(d.table, ph_terms(d.table, cov, sol.theta));
  fit.convergence = {sol.iterations, sol.score_norm};
  fit.n_events = static_cast<int>(d.table.total_events(0) + d.table.total_events(1));
  return fit;
}

/// Pseudo-score U(0) and its robust variance.
struct ScoreAtNull {
  double score = 0.0;
  double variance = 0.0;
};

inline ScoreAtNull fg_score_at_null(const Dataset& data, const CensoringModel& censoring) {
  const detail::FgDesign d = detail::build_fg_design(data, censoring);
  if (d.table.size() == 0) throw TestError("no cause-1 events");
  const Eigen::MatrixXd cov = detail::fg_covariates(d.table, std::nullopt);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd eta = detail::fg_influence(d, cov, zero, data, censoring);
  return {ph_score(d.table, cov, zero).score(0), eta.squaredNorm()};
}

/// 1 - exp(-Gamma(t) exp(beta X)).
inline double fg_predict_cif(const FgFit& fit, double t, int x) {
  check_arm(x);
  if (t > fit.tau) throw DomainError("fg_predict_cif: t beyond tau");
  return -std::expm1(-fit.breslow(t) * std::exp(fit.beta_hat * x));
}

}  // namespace cifreg

#pragma once

// Hypothesis tests for a treatment effect on competing-risks data: log-rank
// and cause-specific Cox tests on the intensities, Wald and score tests on
// the cumulative incidence, and tests of a time-constant effect.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <string_view>

#include "cifreg/censoring.hpp"
#include "cifreg/datagen.hpp"
#include "cifreg/direct_binomial.hpp"
#include "cifreg/distributions.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/fine_gray.hpp"
#include "cifreg/two_arm_ph.hpp"

namespace cifreg {

enum class TestName {
  T_LR_l1,
  T_Cox_l1,
  T_Cox_l1l2,
  T_Gray_F1,
  T_FG_F1,
  T_DB_F1,
  GOF_FG_Wald,
  GOF_DB_Wald,
  GOF_DB_Contrast
};

inline std::string_view to_string(TestName n) {
  switch (n) {
    case TestName::T_LR_l1: return "T_LR_l1";
    case TestName::T_Cox_l1: return "T_Cox_l1";
    case TestName::T_Cox_l1l2: return "T_Cox_l1l2";
    case TestName::T_Gray_F1: return "T_Gray_F1";
    case TestName::T_FG_F1: return "T_FG_F1";
    case TestName::T_DB_F1: return "T_DB_F1";
    case TestName::GOF_FG_Wald: return "GOF_FG_Wald";
    case TestName::GOF_DB_Wald: return "GOF_DB_Wald";
    case TestName::GOF_DB_Contrast: return "GOF_DB_Contrast";
  }
  return "unknown";
}

struct TestResult {
  TestName name = TestName::T_LR_l1;
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;

  bool rejects(double omega = 0.05) const { return p_value < omega; }
};

inline TestResult make_test(TestName name, double statistic, int df) {
  if (!std::isfinite(statistic)) throw TestError(std::string(to_string(name)) + ": statistic is not finite");
  statistic = std::max(0.0, statistic);
  return {name, statistic, df, chi2_tail(statistic, df)};
}

/// Two-sample log-rank test for one cause, other-cause events censored.
inline TestResult logrank_cause(const Dataset& data, int cause) {
  validate(data);
  if (cause != 1 && cause != 2) throw DomainError("logrank_cause: cause must be 1 or 2");
  std::vector<std::pair<double, int>> all;
  for (const auto& r : data.records) all.emplace_back(r.time, r.x);
  std::sort(all.begin(), all.end());
  std::vector<std::pair<double, int>> ev;
  for (const auto& r : data.records)
    if (r.status == cause) ev.emplace_back(r.time, r.x);
  if (ev.empty()) throw TestError("logrank_cause: no events of the requested cause");
  std::sort(ev.begin(), ev.end());
  // Suffix counts of subjects at risk (time >= t) overall and in arm 1.
  std::vector<double> arm1_suffix(all.size() + 1, 0.0);
  for (std::size_t k = all.size(); k-- > 0;) arm1_suffix[k] = arm1_suffix[k + 1] + all[k].second;
  double o_minus_e = 0.0, var = 0.0;
  for (std::size_t i = 0; i < ev.size();) {
    std::size_t j = i;
    double d1 = 0.0;
    while (j < ev.size() && ev[j].first == ev[i].first) d1 += ev[j++].second;
    const double d = static_cast<double>(j - i);
    const auto first = static_cast<std::size_t>(
        std::lower_bound(all.begin(), all.end(), std::make_pair(ev[i].first, -1)) - all.begin());
    const double n = static_cast<double>(all.size() - first);
    const double n1 = arm1_suffix[first];
    o_minus_e += d1 - d * n1 / n;
    if (n > 1.0) var += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0);
    i = j;
  }
  if (!(var > 0.0)) throw TestError("logrank_cause: zero variance");
  return make_test(TestName::T_LR_l1, o_minus_e * o_minus_e / var, 1);
}

struct CoxFit {
  double gamma_hat = 0.0;
  double se = 0.0;
  int cause = 1;
  ConvergenceInfo convergence;
};

namespace detail {
inline CensoringModel no_censoring_model(double tau) {
  CensoringModel m;
  m.curves.emplace_back();
  m.tau = tau;
  return m;
}
}  // namespace detail

/// Cause-specific Cox model with a binary covariate and Breslow ties.
inline CoxFit fit_cox_csh(const Dataset& data, int cause) {
  if (cause != 1 && cause != 2) throw DomainError("fit_cox_csh: cause must be 1 or 2");
  const auto d = detail::build_fg_design(data, detail::no_censoring_model(data.tau), cause, false);
  if (d.table.total_events(0) == 0.0 || d.table.total_events(1) == 0.0)
    throw FitError("fit_cox_csh: monotone likelihood (all events in one arm)");
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(d.table.size()), 1);
  const PhSolution sol = solve_two_arm_ph(d.table, cov);
  return {sol.theta(0), std::sqrt(1.0 / sol.information(0, 0)), cause, {sol.iterations, sol.score_norm}};
}

inline TestResult cox_wald(const CoxFit& fit) {
  return make_test(TestName::T_Cox_l1, std::pow(fit.gamma_hat / fit.se, 2), 1);
}

/// (gamma_1/se_1)^2 + (gamma_2/se_2)^2 on two degrees of freedom.
inline TestResult joint_cox_wald(const Dataset& data) {
  try {
    const CoxFit c1 = fit_cox_csh(data, 1), c2 = fit_cox_csh(data, 2);
    return make_test(TestName::T_Cox_l1l2, std::pow(c1.gamma_hat / c1.se, 2) + std::pow(c2.gamma_hat / c2.se, 2), 2);
  } catch (const NumericalError& e) {
    throw TestError(std::string("joint_cox_wald: ") + e.what());
  }
}

inline TestResult wald_1df(TestName name, double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(se)) throw TestError(std::string(to_string(name)) + ": robust SE missing");
  return make_test(name, std::pow(estimate / se, 2), 1);
}

inline TestResult wald_cif(const FgFit& fit) { return wald_1df(TestName::T_FG_F1, fit.beta_hat, fit.se_robust); }
inline TestResult wald_cif(const DbFit& fit) { return wald_1df(TestName::T_DB_F1, fit.beta_hat, fit.se_robust); }

/// Pseudo-score test of beta = 0 with robust score variance, used as the
/// two-group generalized log-rank test of equal cumulative incidence.
inline TestResult gray_test(const Dataset& data, const CensoringModel& censoring) {
  const ScoreAtNull s = fg_score_at_null(data, censoring);
  if (!(s.variance > 0.0)) throw TestError("gray_test: zero-variance score");
  return make_test(TestName::T_Gray_F1, s.score * s.score / s.variance, 1);
}

inline TestResult gof_fg_wald(const FgExtendedFit& fit) {
  return wald_1df(TestName::GOF_FG_Wald, fit.nu_hat, std::sqrt(fit.covariance(1, 1)));
}

/// Wald test of nu = 0 in beta(t) = beta + nu b(t).
inline TestResult gof_fg_wald(const Dataset& data, const CensoringModel& censoring, TimeFunction b_spec) {
  return gof_fg_wald(fg_fit_extended(data, censoring, b_spec));
}

inline TestResult gof_db_wald(const DbExtendedFit& fit) {
  return wald_1df(TestName::GOF_DB_Wald, fit.nu_hat, std::sqrt(fit.covariance(1, 1)));
}

/// (C b)' (C S C')^{-1} (C b) with C the successive-difference contrast.
inline TestResult gof_db_contrast(const DbUnconstrainedFit& fit) {
  if (!fit.beta_covariance) throw TestError("gof_db_contrast: no bootstrap covariance (n_boot = 0)");
  const auto R = static_cast<Eigen::Index>(fit.beta_hat.size());
  if (R < 2) throw TestError("gof_db_contrast: at least two grid points are required");
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(R - 1, R);
  for (Eigen::Index j = 0; j < R - 1; ++j) {
    C(j, j) = 1.0;
    C(j, j + 1) = -1.0;
  }
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(fit.beta_hat.data(), R);
  const Eigen::VectorXd cb = C * b;
  const Eigen::MatrixXd v = C * (*fit.beta_covariance) * C.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  if (!lu.isInvertible()) throw TestError("gof_db_contrast: singular contrast covariance");
  return make_test(TestName::GOF_DB_Contrast, cb.dot(lu.solve(cb)), static_cast<int>(R - 1));
}

/// n = (1/p_obs) (z_{1-omega/2} + z_{1-omega'})^2 / (beta1^2 pX1 (1 - pX1)), rounded up.
inline long latouche_sample_size(double omega, double omega_prime, double beta1, double p_x1, double p_obs_type1) {
  for (double p : {omega, omega_prime, p_x1})
    if (!(p > 0.0 && p < 1.0)) throw DomainError("latouche_sample_size: probabilities must lie in (0,1)");
  if (!(p_obs_type1 > 0.0 && p_obs_type1 <= 1.0))
    throw DomainError("latouche_sample_size: p_obs must lie in (0,1]");
  if (beta1 == 0.0) throw DomainError("latouche_sample_size: beta1 = 0 gives division by zero");
  const double z = normal_quantile(1.0 - omega / 2.0) + normal_quantile(1.0 - omega_prime);
  return static_cast<long>(std::ceil(z * z / (beta1 * beta1 * p_x1 * (1.0 - p_x1)) / p_obs_type1));
}

}  // namespace cifreg

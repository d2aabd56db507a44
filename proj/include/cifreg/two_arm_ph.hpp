#pragma once

// Weighted partial likelihood for a binary covariate, aggregated over arms.
// Arm 0 carries no covariate and arm 1 the row c(t_j) of a covariate matrix,
// so the Cox model, the Fine-Gray model and its time-varying extension all
// reduce to the same two-arm sums at the distinct event times t_j.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "cifreg/errors.hpp"

namespace cifreg {

/// Event counts and weighted risk-set sizes per arm at each distinct event time.
struct RiskTable {
  std::vector<double> time;
  std::array<std::vector<double>, 2> events;
  std::array<std::vector<double>, 2> weight;

  std::size_t size() const { return time.size(); }
  void resize(std::size_t m) {
    time.resize(m);
    for (int x = 0; x < 2; ++x) {
      events[x].assign(m, 0.0);
      weight[x].assign(m, 0.0);
    }
  }
  double total_events(int x) const {
    double s = 0.0;
    for (double d : events[x]) s += d;
    return s;
  }
};

/// Per-time quantities of the partial likelihood at a given coefficient.
struct PhTerms {
  std::vector<double> rel_risk1;  ///< exp(c_j' theta)
  std::vector<double> s0;         ///< W0 + W1 exp(c_j' theta)
  std::vector<double> p1;         ///< W1 exp(c_j' theta) / s0
  std::vector<double> dgamma;     ///< Breslow increment (d0 + d1) / s0
};

inline PhTerms ph_terms(const RiskTable& rt, const Eigen::MatrixXd& cov, const Eigen::VectorXd& theta) {
  const std::size_t m = rt.size();
  PhTerms t;
  t.rel_risk1.resize(m);
  t.s0.resize(m);
  t.p1.resize(m);
  t.dgamma.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double eta = cov.row(static_cast<Eigen::Index>(j)).dot(theta);
    const double r = std::exp(eta);
    const double w1r = rt.weight[1][j] * r;
    t.rel_risk1[j] = r;
    t.s0[j] = rt.weight[0][j] + w1r;
    t.p1[j] = t.s0[j] > 0.0 ? w1r / t.s0[j] : 0.0;
    t.dgamma[j] = t.s0[j] > 0.0 ? (rt.events[0][j] + rt.events[1][j]) / t.s0[j] : 0.0;
  }
  return t;
}

inline double ph_loglik(const RiskTable& rt, const Eigen::MatrixXd& cov, const Eigen::VectorXd& theta) {
  double l = 0.0;
  for (std::size_t j = 0; j < rt.size(); ++j) {
    const double d = rt.events[0][j] + rt.events[1][j];
    if (d == 0.0) continue;
    const double eta = cov.row(static_cast<Eigen::Index>(j)).dot(theta);
    const double w0 = rt.weight[0][j], w1 = rt.weight[1][j];
    double log_s0;
    if (w1 == 0.0) {
      log_s0 = std::log(w0);
    } else if (w0 == 0.0) {
      log_s0 = std::log(w1) + eta;
    } else {
      const double a = std::log(w0), b = std::log(w1) + eta;
      log_s0 = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
    }
    l += rt.events[1][j] * eta - d * log_s0;
  }
  return l;
}

struct PhScore {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

inline PhScore ph_score(const RiskTable& rt, const Eigen::MatrixXd& cov, const Eigen::VectorXd& theta) {
  const auto p = cov.cols();
  PhScore s{Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p)};
  const PhTerms t = ph_terms(rt, cov, theta);
  for (std::size_t j = 0; j < rt.size(); ++j) {
    const double d = rt.events[0][j] + rt.events[1][j];
    if (d == 0.0) continue;
    const Eigen::VectorXd c = cov.row(static_cast<Eigen::Index>(j)).transpose();
    s.score += (rt.events[1][j] - d * t.p1[j]) * c;
    s.information += d * t.p1[j] * (1.0 - t.p1[j]) * c * c.transpose();
  }
  return s;
}

struct PhSolution {
  Eigen::VectorXd theta;
  Eigen::MatrixXd information;
  int iterations = 0;
  double score_norm = 0.0;
};

inline constexpr double kScoreTolerance = 1e-10;
inline constexpr int kMaxNewtonIterations = 100;

/// Newton-Raphson from theta = 0 with step-halving on the log partial likelihood.
inline PhSolution solve_two_arm_ph(const RiskTable& rt, const Eigen::MatrixXd& cov) {
  if (rt.total_events(0) + rt.total_events(1) == 0.0) throw FitError("no events to fit");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(cov.cols());
  double l = ph_loglik(rt, cov, theta);
  for (int it = 0; it <= kMaxNewtonIterations; ++it) {
    PhScore s = ph_score(rt, cov, theta);
    const double norm = s.score.cwiseAbs().maxCoeff();
    if (norm < kScoreTolerance) return {theta, s.information, it, norm};
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))
      throw FitError("singular information matrix");
    const Eigen::VectorXd step = ldlt.solve(s.score);
    double t = 1.0;
    Eigen::VectorXd cand = theta + step;
    double lc = ph_loglik(rt, cov, cand);
    for (int halvings = 0; halvings < 40 && !(lc >= l - 1e-13 * std::abs(l)); ++halvings) {
      t *= 0.5;
      cand = theta + t * step;
      lc = ph_loglik(rt, cov, cand);
    }
    const double moved = (t * step).norm();
    theta = cand;
    l = lc;
    if (moved < 1e-14 * (1.0 + theta.norm()) && norm < 1e-8) {
      s = ph_score(rt, cov, theta);
      return {theta, s.information, it + 1, s.score.cwiseAbs().maxCoeff()};
    }
    if (!theta.allFinite() || theta.cwiseAbs().maxCoeff() > 50.0)
      throw ConvergenceError("partial likelihood diverged (monotone likelihood)");
  }
  throw ConvergenceError("Newton-Raphson did not converge in 100 iterations");
}

}  // namespace cifreg

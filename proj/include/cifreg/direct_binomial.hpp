#pragma once

// Direct binomial regression of the cloglog cumulative incidence model
//   F1(s_r|X) = h(alpha_r + beta X)
// on a time grid, from IPCW-weighted cause-1 indicators under working
// independence.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cifreg/censoring.hpp"
#include "cifreg/datagen.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/fine_gray.hpp"
#include "cifreg/link.hpp"

namespace cifreg {

/// R equi-spaced interior points s_r = r tau / (R + 1).
inline std::vector<double> default_grid(int R, double tau = 1.0) {
  if (R < 1) throw DomainError("default_grid: R must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(R));
  for (int r = 1; r <= R; ++r) g[static_cast<std::size_t>(r - 1)] = r * tau / (R + 1);
  return g;
}

inline std::vector<double> checked_grid(std::vector<double> grid, double tau) {
  if (grid.empty()) throw DomainError("grid is empty");
  std::sort(grid.begin(), grid.end());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (!(grid[r] > 0.0 && grid[r] < tau)) throw DomainError("grid points must lie strictly inside (0, tau)");
    if (r > 0 && grid[r] == grid[r - 1]) throw DomainError("grid points must be distinct");
  }
  return grid;
}

struct DbFit {
  std::vector<double> grid;
  std::vector<double> alpha_hat;
  double beta_hat = 0.0;
  Eigen::MatrixXd covariance;  ///< (alpha_1..alpha_R, beta)
  double se_robust = 0.0;
  ConvergenceInfo convergence;
  std::vector<double> dropped_grid;
  std::vector<std::string> warnings;
  int monotonicity_violations = 0;
  int n_boot = 0;
};

/// Fit of beta_r = beta + nu b(s_r).
struct DbExtendedFit {
  std::vector<double> grid;
  std::vector<double> alpha_hat;
  double beta_hat = 0.0;
  double nu_hat = 0.0;
  TimeFunction b_spec = TimeFunction::t;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  ConvergenceInfo convergence;
};

struct DbUnconstrainedFit {
  std::vector<double> grid;
  std::vector<double> alpha_hat;
  std::vector<double> beta_hat;
  std::optional<Eigen::MatrixXd> beta_covariance;
  int n_boot = 0;
};

namespace detail {

/// Weighted responses summed per arm and grid point.
struct DbDesign {
  std::vector<double> grid;
  std::array<std::vector<double>, 2> y;  ///< sum over arm of tilde N_ir
  std::array<double, 2> n{0.0, 0.0};
  std::vector<double> dropped;
};

inline DbDesign build_db_design(const Dataset& data, const CensoringModel& cens, const std::vector<double>& grid_in) {
  validate(data);
  const std::vector<double> grid = checked_grid(grid_in, data.tau);
  DbDesign d;
  std::array<std::vector<double>, 2> y;
  for (int x = 0; x < 2; ++x) y[x].assign(grid.size(), 0.0);
  for (const auto& r : data.records) {
    d.n[r.x] += 1.0;
    if (r.status != 1 || r.time > grid.back()) continue;
    const double w = checked_inverse(cens.survival(r.x, r.time));
    for (std::size_t k = std::lower_bound(grid.begin(), grid.end(), r.time) - grid.begin(); k < grid.size(); ++k)
      y[r.x][k] += w;
  }
  if (d.n[0] == 0.0 || d.n[1] == 0.0) throw FitError("non-identifiable: all subjects are in one arm");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (y[0][k] + y[1][k] == 0.0) {
      d.dropped.push_back(grid[k]);
      continue;
    }
    d.grid.push_back(grid[k]);
    for (int x = 0; x < 2; ++x) d.y[x].push_back(y[x][k]);
  }
  if (d.grid.empty()) throw FitError("no cause-1 events before the last grid point");
  double y0 = 0.0, y1 = 0.0;
  for (std::size_t k = 0; k < d.grid.size(); ++k) {
    y0 += d.y[0][k];
    y1 += d.y[1][k];
  }
  if (y0 == 0.0 || y1 == 0.0) throw FitError("non-identifiable: an arm has no cause-1 events on the grid");
  return d;
}

/// theta = (alpha_1..alpha_R, theta_b); arm-1 predictor alpha_r + c_r' theta_b.
struct DbProblem {
  const DbDesign& d;
  Eigen::MatrixXd cov;  ///< R x p

  Eigen::Index R() const { return static_cast<Eigen::Index>(d.grid.size()); }
  Eigen::Index dim() const { return R() + cov.cols(); }
  double eta(const Eigen::VectorXd& th, int x, Eigen::Index r) const {
    return th(r) + (x == 1 ? cov.row(r).dot(th.tail(cov.cols())) : 0.0);
  }
  Eigen::VectorXd deta(int x, Eigen::Index r) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
    g(r) = 1.0;
    if (x == 1) g.tail(cov.cols()) = cov.row(r).transpose();
    return g;
  }
  double loglik(const Eigen::VectorXd& th) const {
    double l = 0.0;
    for (int x = 0; x < 2; ++x)
      for (Eigen::Index r = 0; r < R(); ++r) l += cloglog::binomial_loglik(d.y[x][static_cast<std::size_t>(r)], d.n[x], eta(th, x, r));
    return l;
  }
  /// Estimating function and the negative of its Jacobian.
  void ee(const Eigen::VectorXd& th, Eigen::VectorXd& u, Eigen::MatrixXd& j, bool expected) const {
    u = Eigen::VectorXd::Zero(dim());
    j = Eigen::MatrixXd::Zero(dim(), dim());
    for (int x = 0; x < 2; ++x)
      for (Eigen::Index r = 0; r < R(); ++r) {
        const double v = eta(th, x, r);
        const double yv = d.y[x][static_cast<std::size_t>(r)];
        const double resid = yv - d.n[x] * cloglog::h(v);
        const double c = cloglog::score_weight(v);
        double k = d.n[x] * c * cloglog::h_prime(v);
        if (!expected) k -= cloglog::score_weight_prime(v) * resid;
        const Eigen::VectorXd g = deta(x, r);
        u += c * resid * g;
        j += k * g * g.transpose();
      }
  }
};

inline PhSolution solve_db(const DbProblem& prob) {
  Eigen::VectorXd th = Eigen::VectorXd::Zero(prob.dim());
  for (Eigen::Index r = 0; r < prob.R(); ++r) {
    const auto k = static_cast<std::size_t>(r);
    const double p = (prob.d.y[0][k] + prob.d.y[1][k]) / (prob.d.n[0] + prob.d.n[1]);
    th(r) = cloglog::g(std::clamp(p, 1e-6, 1.0 - 1e-6));
  }
  double l = prob.loglik(th);
  Eigen::VectorXd u;
  Eigen::MatrixXd j;
  for (int it = 0; it <= kMaxNewtonIterations; ++it) {
    prob.ee(th, u, j, false);
    const double norm = u.cwiseAbs().maxCoeff();
    if (norm < kScoreTolerance) return {th, j, it, norm};
    Eigen::LDLT<Eigen::MatrixXd> ldlt(j);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
      Eigen::VectorXd u2;
      prob.ee(th, u2, j, true);
      ldlt.compute(j);
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw FitError("singular estimating-equation Jacobian");
    }
    const Eigen::VectorXd step = ldlt.solve(u);
    double t = 1.0;
    Eigen::VectorXd cand = th + step;
    double lc = prob.loglik(cand);
    for (int halvings = 0; halvings < 40 && !(lc >= l - 1e-13 * std::abs(l)); ++halvings) {
      t *= 0.5;
      cand = th + t * step;
      lc = prob.loglik(cand);
    }
    const double moved = (t * step).norm();
    th = cand;
    l = lc;
    if (!th.allFinite() || th.cwiseAbs().maxCoeff() > 50.0) throw FitError("direct binomial fit diverged");
    if (moved < 1e-14 * (1.0 + th.norm()) && norm < 1e-8) {
      prob.ee(th, u, j, false);
      return {th, j, it + 1, u.cwiseAbs().maxCoeff()};
    }
  }
  throw ConvergenceError("direct binomial Newton-Raphson did not converge in 100 iterations");
}

/// Per-subject estimating-function contributions plus the G-estimation correction.
inline Eigen::MatrixXd db_influence(const DbProblem& prob, const Eigen::VectorXd& th, const Dataset& data,
                                    const CensoringModel& cens) {
  const auto R = prob.R();
  const auto dim = prob.dim();
  const auto& grid = prob.d.grid;
  // Per-arm constant parts: c_xr g_xr and c_xr mu_xr g_xr.
  std::array<std::vector<Eigen::VectorXd>, 2> cg;
  std::array<Eigen::VectorXd, 2> base;
  for (int x = 0; x < 2; ++x) {
    base[x] = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index r = 0; r < R; ++r) {
      const double v = prob.eta(th, x, r);
      cg[x].push_back(cloglog::score_weight(v) * prob.deta(x, r));
      base[x] -= cloglog::h(v) * cg[x].back();
    }
  }
  // w_i sum_{r: s_r >= T_i} c g, the response part of subject i.
  std::array<std::vector<Eigen::VectorXd>, 2> tail_cg;
  for (int x = 0; x < 2; ++x) {
    tail_cg[x].assign(static_cast<std::size_t>(R) + 1, Eigen::VectorXd::Zero(dim));
    for (Eigen::Index r = R; r-- > 0;)
      tail_cg[x][static_cast<std::size_t>(r)] = tail_cg[x][static_cast<std::size_t>(r) + 1] + cg[x][static_cast<std::size_t>(r)];
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(data.size()), dim);
  std::vector<Eigen::VectorXd> resp(data.size(), Eigen::VectorXd::Zero(dim));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data.records[i];
    if (rec.status == 1 && rec.time <= grid.back()) {
      const auto first = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), rec.time) - grid.begin());
      resp[i] = checked_inverse(cens.survival(rec.x, rec.time)) * tail_cg[rec.x][first];
    }
    a.row(static_cast<Eigen::Index>(i)) = (base[rec.x] + resp[i]).transpose();
  }
  // Q(u) = sum over the stratum of subjects with T_i > u of their response part.
  std::vector<std::vector<Eigen::VectorXd>> q(static_cast<std::size_t>(cens.strata()));
  for (int s = 0; s < cens.strata(); ++s) {
    const KmCurve& km = cens.curves[static_cast<std::size_t>(s)];
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (cens.stratum_of(data.records[i].x) == s && resp[i].squaredNorm() > 0.0) order.emplace_back(data.records[i].time, i);
    std::sort(order.begin(), order.end());
    std::vector<Eigen::VectorXd> suffix(order.size() + 1, Eigen::VectorXd::Zero(dim));
    for (std::size_t k = order.size(); k-- > 0;) suffix[k] = suffix[k + 1] + resp[order[k].second];
    auto& qs = q[static_cast<std::size_t>(s)];
    for (double u : km.jump_times) {
      const auto pos = std::upper_bound(order.begin(), order.end(), std::make_pair(u, data.size())) - order.begin();
      qs.push_back(suffix[static_cast<std::size_t>(pos)]);
    }
  }
  const auto corr = censoring_correction(cens, data, q, static_cast<int>(dim));
  for (std::size_t i = 0; i < data.size(); ++i) a.row(static_cast<Eigen::Index>(i)) += corr[i].transpose();
  return a;
}

inline Eigen::MatrixXd db_sandwich(const Eigen::MatrixXd& jac, const Eigen::MatrixXd& infl) {
  const Eigen::MatrixXd inv = jac.inverse();
  return inv * (infl.transpose() * infl) * inv.transpose();
}

}  // namespace detail

/// Direct binomial fit with robust sandwich covariance.
inline DbFit db_fit(const Dataset& data, const CensoringModel& censoring, const std::vector<double>& grid) {
  const detail::DbDesign d = detail::build_db_design(data, censoring, grid);
  const detail::DbProblem prob{d, Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(d.grid.size()), 1)};
  const PhSolution sol = detail::solve_db(prob);
  DbFit fit;
  fit.grid = d.grid;
  fit.dropped_grid = d.dropped;
  for (double s : d.dropped) fit.warnings.push_back("grid point " + format_double(s) + " has no events; removed");
  const auto R = prob.R();
  for (Eigen::Index r = 0; r < R; ++r) fit.alpha_hat.push_back(sol.theta(r));
  for (std::size_t r = 1; r < fit.alpha_hat.size(); ++r)
    if (fit.alpha_hat[r] < fit.alpha_hat[r - 1]) ++fit.monotonicity_violations;
  fit.beta_hat = sol.theta(R);
  fit.covariance = detail::db_sandwich(sol.information, detail::db_influence(prob, sol.theta, data, censoring));
  fit.se_robust = std::sqrt(fit.covariance(R, R));
  fit.convergence = {sol.iterations, sol.score_norm};
  return fit;
}

inline DbFit db_fit(const Dataset& data, const CensoringModel& censoring, int R = 6) {
  return db_fit(data, censoring, default_grid(R, data.tau));
}

/// Covariance of the fit: the sandwich, or a subject bootstrap that re-estimates G.
inline Eigen::MatrixXd db_robust_variance(const DbFit& fit, const Dataset& data, const CensoringModel& censoring,
                                          VarianceMethod method = VarianceMethod::influence, int n_boot = 500,
                                          std::uint64_t seed = 1) {
  if (method == VarianceMethod::influence) return fit.covariance;
  const bool strat = censoring.stratified;
  const std::size_t dim = fit.grid.size() + 1;
  const auto reps = detail::bootstrap_replicates(data, n_boot, seed, [&](const Dataset& b) {
    const DbFit f = db_fit(b, km_censoring(b, strat), fit.grid);
    if (f.grid.size() + 1 != dim) throw FitError("bootstrap resample lost a grid point");
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < f.alpha_hat.size(); ++r) v(static_cast<Eigen::Index>(r)) = f.alpha_hat[r];
    v(static_cast<Eigen::Index>(dim - 1)) = f.beta_hat;
    return v;
  });
  return detail::sample_covariance(reps);
}

/// Direct binomial fit of beta_r = beta + nu b(s_r).
inline DbExtendedFit db_fit_extended(const Dataset& data, const CensoringModel& censoring,
                                     const std::vector<double>& grid, TimeFunction b_spec) {
  const detail::DbDesign d = detail::build_db_design(data, censoring, grid);
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(d.grid.size()), 2);
  for (std::size_t r = 0; r < d.grid.size(); ++r) {
    cov(static_cast<Eigen::Index>(r), 0) = 1.0;
    cov(static_cast<Eigen::Index>(r), 1) = eval_time_function(b_spec, d.grid[r]);
  }
  if (d.grid.size() < 2) throw FitError("b(s_r) is constant over the grid; nu is not identifiable");
  const detail::DbProblem prob{d, cov};
  const PhSolution sol = detail::solve_db(prob);
  const Eigen::MatrixXd full = detail::db_sandwich(sol.information, detail::db_influence(prob, sol.theta, data, censoring));
  DbExtendedFit fit;
  fit.grid = d.grid;
  const auto R = prob.R();
  for (Eigen::Index r = 0; r < R; ++r) fit.alpha_hat.push_back(sol.theta(r));
  fit.beta_hat = sol.theta(R);
  fit.nu_hat = sol.theta(R + 1);
  fit.b_spec = b_spec;
  fit.covariance = full.bottomRightCorner(2, 2);
  fit.convergence = {sol.iterations, sol.score_norm};
  return fit;
}

namespace detail {

inline DbUnconstrainedFit db_pointwise(const Dataset& data, const CensoringModel& censoring,
                                       const std::vector<double>& grid) {
  validate(data);
  const std::vector<double> g = checked_grid(grid, data.tau);
  std::array<std::vector<double>, 2> y;
  std::array<double, 2> n{0.0, 0.0};
  for (int x = 0; x < 2; ++x) y[x].assign(g.size(), 0.0);
  for (const auto& r : data.records) {
    n[r.x] += 1.0;
    if (r.status != 1 || r.time > g.back()) continue;
    const double w = checked_inverse(censoring.survival(r.x, r.time));
    for (std::size_t k = std::lower_bound(g.begin(), g.end(), r.time) - g.begin(); k < g.size(); ++k) y[r.x][k] += w;
  }
  if (n[0] == 0.0 || n[1] == 0.0) throw FitError("non-identifiable: all subjects are in one arm");
  DbUnconstrainedFit fit;
  fit.grid = g;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double p0 = y[0][k] / n[0], p1 = y[1][k] / n[1];
    if (!(p0 > 0.0 && p0 < 1.0 && p1 > 0.0 && p1 < 1.0))
      throw FitError("non-identifiable: an arm has no events (or only events) by a grid point");
    fit.alpha_hat.push_back(cloglog::g(p0));
    fit.beta_hat.push_back(cloglog::g(p1) - cloglog::g(p0));
  }
  return fit;
}

}  // namespace detail

/// Per-grid-point two-parameter fits; each has the saturated closed form
/// alpha_r = g(p0_r), beta_r = g(p1_r) - g(p0_r) with p_x the mean weighted response.
inline DbUnconstrainedFit db_fit_unconstrained(const Dataset& data, const CensoringModel& censoring,
                                               const std::vector<double>& grid, int n_boot, std::uint64_t seed = 1) {
  DbUnconstrainedFit fit = detail::db_pointwise(data, censoring, grid);
  fit.n_boot = n_boot;
  if (n_boot <= 0) return fit;
  const bool strat = censoring.stratified;
  const auto reps = detail::bootstrap_replicates(data, n_boot, seed, [&](const Dataset& b) {
    const DbUnconstrainedFit f = detail::db_pointwise(b, km_censoring(b, strat), fit.grid);
    return Eigen::Map<const Eigen::VectorXd>(f.beta_hat.data(), static_cast<Eigen::Index>(f.beta_hat.size())).eval();
  });
  fit.beta_covariance = detail::sample_covariance(reps);
  return fit;
}

/// h(alpha_r + beta X) at a grid point of the fit.
inline double db_predict_cif(const DbFit& fit, double s, int x) {
  check_arm(x);
  const auto it = std::find_if(fit.grid.begin(), fit.grid.end(),
                               [&](double g) { return std::abs(g - s) <= 1e-12 * std::max(1.0, std::abs(s)); });
  if (it == fit.grid.end()) throw DomainError("db_predict_cif: time is not a grid point of the fit");
  return cloglog::h(fit.alpha_hat[static_cast<std::size_t>(it - fit.grid.begin())] + fit.beta_hat * x);
}

}  // namespace cifreg

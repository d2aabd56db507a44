#pragma once

// Probability limits of the Fine-Gray and direct binomial estimators when the
// cloglog proportional model may be misspecified, computed from the true
// generating law by quadrature and root finding.

#include <algorithm>
#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cifreg/datagen.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/link.hpp"
#include "cifreg/numerics.hpp"
#include "cifreg/parallel.hpp"
#include "cifreg/process_model.hpp"

namespace cifreg {

struct SolverDiagnostics {
  double bracket_lo = 0.0, bracket_hi = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct LimitResult {
  double beta_star = 0.0;
  std::vector<double> grid;        ///< DB grid (empty for FG)
  std::vector<double> alpha_star;  ///< DB intercepts at the grid points
  double censoring_rate = 0.0;     ///< FG: the exponential random-censoring rate used
  SolverDiagnostics diagnostics;
};

struct LimitOptions {
  double p_x1 = 0.5;
  double tau = 1.0;
  /// Rate of the exponential random censoring G(t) = exp(-rate t). The
  /// stabilized-weight Fine-Gray limit weights the score integrand by G.
  double censoring_rate = 0.0;
};

namespace detail {

inline double arm_prob(int x, double p_x1) { return x == 1 ? p_x1 : 1.0 - p_x1; }

/// Limiting pseudo-score of the Fine-Gray estimator at beta.
inline double fg_limit_score(const Truth& truth, double beta, const LimitOptions& o) {
  const double shape = truth_cause1_shape(truth);
  const double power = shape < 1.0 ? 1.0 / shape : 1.0;
  const double p1 = o.p_x1, p0 = 1.0 - o.p_x1, eb = std::exp(beta);
  auto integrand = [&](double t) {
    if (t <= 0.0) return 0.0;
    const double f0 = truth_subdensity1(truth, t, 0), f1 = truth_subdensity1(truth, t, 1);
    const double s1 = p1 * eb * (1.0 - truth_cif1(truth, t, 1));
    const double s0 = p0 * (1.0 - truth_cif1(truth, t, 0)) + s1;
    const double g = o.censoring_rate > 0.0 ? std::exp(-o.censoring_rate * t) : 1.0;
    return g * (p1 * f1 - s1 / s0 * (p0 * f0 + p1 * f1));
  };
  return numerics::integrate_from_zero(integrand, o.tau, power, 1e-13, 1e-13);
}

}  // namespace detail

/// beta*_FG: root of the limiting pseudo-score on (0, tau].
inline LimitResult limit_fg(const Truth& truth, const LimitOptions& o = {}) {
  if (!(o.p_x1 > 0.0 && o.p_x1 < 1.0)) throw DomainError("limit_fg: P(X=1) must lie in (0,1)");
  std::visit([](const auto& m) { m.validate(); }, truth);
  auto f = [&](double b) { return detail::fg_limit_score(truth, b, o); };
  double lo = -5.0, hi = 5.0;
  while (f(lo) * f(hi) > 0.0) {
    if (hi >= 20.0) throw NumericalError("limit_fg: no sign change on [-20, 20]");
    lo *= 2.0;
    hi *= 2.0;
  }
  const auto root = numerics::brent(f, lo, hi, 1e-15);
  LimitResult res;
  res.beta_star = root.root;
  res.censoring_rate = o.censoring_rate;
  res.diagnostics = {lo, hi, root.iterations, std::abs(f(root.root))};
  return res;
}

/// beta*_FG with the censoring rate calibrated so that a fraction pi_r of
/// cause-1 events is lost to follow-up.
inline LimitResult limit_fg_calibrated(const Truth& truth, double pi_r, LimitOptions o = {}) {
  o.censoring_rate = calibrate_censoring_rate(truth, pi_r, o.tau, o.p_x1);
  return limit_fg(truth, o);
}

/// (alpha*, beta*_DB): zero of the population direct binomial equations
///   sum_x P_x c(eta_xr) (F1(s_r|x) - h(eta_xr)) = 0 for each r,
///   sum_r P_1 c(eta_1r) (F1(s_r|1) - h(eta_1r)) = 0.
inline LimitResult limit_db(const Truth& truth, std::vector<double> grid, const LimitOptions& o = {}) {
  std::sort(grid.begin(), grid.end());
  if (grid.empty()) throw DomainError("limit_db: empty grid");
  if (!(o.p_x1 > 0.0 && o.p_x1 < 1.0)) throw DomainError("limit_db: P(X=1) must lie in (0,1)");
  for (double s : grid)
    if (!(s > 0.0 && s < o.tau)) throw DomainError("limit_db: grid must lie in (0, tau)");
  std::visit([](const auto& m) { m.validate(); }, truth);
  const auto R = static_cast<Eigen::Index>(grid.size());
  std::vector<std::array<double, 2>> F(grid.size());
  for (std::size_t r = 0; r < grid.size(); ++r)
    for (int x = 0; x < 2; ++x) F[r][x] = truth_cif1(truth, grid[r], x);
  const double P[2] = {1.0 - o.p_x1, o.p_x1};

  Eigen::VectorXd th(R + 1);
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto& fr = F[static_cast<std::size_t>(r)];
    th(r) = cloglog::g(P[0] * fr[0] + P[1] * fr[1]);
  }
  th(R) = 0.0;
  auto equations = [&](const Eigen::VectorXd& t, Eigen::MatrixXd* jac) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(R + 1);
    if (jac) jac->setZero(R + 1, R + 1);
    for (Eigen::Index r = 0; r < R; ++r)
      for (int x = 0; x < 2; ++x) {
        const double v = t(r) + (x == 1 ? t(R) : 0.0);
        const double resid = F[static_cast<std::size_t>(r)][x] - cloglog::h(v);
        const double c = cloglog::score_weight(v);
        const double e = P[x] * c * resid;
        u(r) += e;
        if (x == 1) u(R) += e;
        if (jac) {
          const double d = P[x] * (cloglog::score_weight_prime(v) * resid - c * cloglog::h_prime(v));
          (*jac)(r, r) += d;
          if (x == 1) {
            (*jac)(r, R) += d;
            (*jac)(R, r) += d;
            (*jac)(R, R) += d;
          }
        }
      }
    return u;
  };
  Eigen::MatrixXd jac;
  int it = 0;
  double resid = 0.0;
  for (;; ++it) {
    const Eigen::VectorXd u = equations(th, &jac);
    resid = u.cwiseAbs().maxCoeff();
    if (resid < 1e-14) break;
    if (it >= 100) throw NumericalError("limit_db: Newton did not converge, residual " + format_double(resid));
    Eigen::VectorXd step = jac.fullPivLu().solve(-u);
    double t = 1.0;
    while (t > 1e-6) {
      const Eigen::VectorXd cand = th + t * step;
      if (equations(cand, nullptr).cwiseAbs().maxCoeff() < resid || resid < 1e-12) {
        th = cand;
        break;
      }
      t *= 0.5;
    }
    if (t <= 1e-6) {
      if (resid < 1e-11) break;
      throw NumericalError("limit_db: line search failed, residual " + format_double(resid));
    }
  }
  LimitResult res;
  res.beta_star = th(R);
  res.grid = grid;
  for (Eigen::Index r = 0; r < R; ++r) res.alpha_star.push_back(th(r));
  res.diagnostics = {0.0, 0.0, it, resid};
  return res;
}

/// Limiting cumulative incidence curves F*_1(t|x), x = 0, 1.
struct LimitCurves {
  std::vector<double> time;
  std::vector<double> f1_arm0, f1_arm1;
};

/// FG: Gamma*(t) = int_0^t E_X f1(u|X) / E_X[e^{beta* X}(1 - F1(u|X))] du.
inline double limit_fg_baseline(const Truth& truth, double beta_star, double t, double p_x1 = 0.5) {
  if (t <= 0.0) return 0.0;
  const double shape = truth_cause1_shape(truth);
  const double power = shape < 1.0 ? 1.0 / shape : 1.0;
  const double eb = std::exp(beta_star);
  auto dgamma = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double num = (1.0 - p_x1) * truth_subdensity1(truth, u, 0) + p_x1 * truth_subdensity1(truth, u, 1);
    const double den = (1.0 - p_x1) * (1.0 - truth_cif1(truth, u, 0)) + p_x1 * eb * (1.0 - truth_cif1(truth, u, 1));
    return num / den;
  };
  return numerics::integrate_from_zero(dgamma, t, power, 1e-13, 1e-12);
}

/// FG limits on an arbitrary time grid; DB limits (non-empty alpha_star) at the DB grid.
inline LimitCurves limit_f1_curves(const Truth& truth, const LimitResult& limit, const std::vector<double>& grid = {},
                                   double p_x1 = 0.5) {
  LimitCurves c;
  const double eb = std::exp(limit.beta_star);
  if (!limit.alpha_star.empty()) {
    c.time = limit.grid;
    for (double a : limit.alpha_star) {
      c.f1_arm0.push_back(cloglog::h(a));
      c.f1_arm1.push_back(cloglog::h(a + limit.beta_star));
    }
    return c;
  }
  c.time = grid;
  for (double t : grid) {
    const double gam = limit_fg_baseline(truth, limit.beta_star, t, p_x1);
    c.f1_arm0.push_back(-std::expm1(-gam));
    c.f1_arm1.push_back(-std::expm1(-gam * eb));
  }
  return c;
}

/// Parameter grid for a contour sweep over intensity models.
struct SweepSpec {
  std::vector<double> exp_g1{1.0};
  std::vector<double> exp_g2{1.0};
  std::vector<double> p1{0.6};
  std::vector<double> kappa1{1.0};
  std::vector<double> kappa2{1.0};
  double p_event = 0.6;
  double tau = 1.0;
  double p_x1 = 0.5;
  double censoring_target = 0.2;  ///< pi_r used to set G for the FG limit
};

struct SweepRow {
  double exp_g1 = 1.0, exp_g2 = 1.0, p1 = 0.6, kappa1 = 1.0, kappa2 = 1.0;
  double beta_star_fg = NAN, beta_star_db6 = NAN, beta_star_db3 = NAN;
  std::string error;
};

/// beta*_FG, beta*_DB (R = 6) and beta*_DB (R = 3) for one intensity model.
inline SweepRow limit_cell(double exp_g1, double exp_g2, double p1, double kappa1, double kappa2,
                           const SweepSpec& spec) {
  SweepRow row{exp_g1, exp_g2, p1, kappa1, kappa2, NAN, NAN, NAN, {}};
  try {
    const Truth truth = make_intensity_model(spec.p_event, p1, exp_g1, exp_g2, kappa1, kappa2, spec.tau);
    LimitOptions o{spec.p_x1, spec.tau, 0.0};
    row.beta_star_fg = limit_fg_calibrated(truth, spec.censoring_target, o).beta_star;
    auto grid = [&](int R) {
      std::vector<double> g;
      for (int r = 1; r <= R; ++r) g.push_back(r * spec.tau / (R + 1));
      return g;
    };
    row.beta_star_db6 = limit_db(truth, grid(6), o).beta_star;
    row.beta_star_db3 = limit_db(truth, grid(3), o).beta_star;
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<SweepRow> limit_grid_sweep(const SweepSpec& spec, unsigned threads = 1) {
  struct Cell {
    double g1, g2, p1, k1, k2;
  };
  std::vector<Cell> cells;
  for (double k1 : spec.kappa1)
    for (double k2 : spec.kappa2)
      for (double p1 : spec.p1)
        for (double g2 : spec.exp_g2)
          for (double g1 : spec.exp_g1) cells.push_back({g1, g2, p1, k1, k2});
  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    rows[i] = limit_cell(c.g1, c.g2, c.p1, c.k1, c.k2, spec);
  });
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "exp_g1,exp_g2,p1,kappa1,kappa2,beta_star_fg,beta_star_db6,beta_star_db3,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    os << format_double(r.exp_g1) << ',' << format_double(r.exp_g2) << ',' << format_double(r.p1) << ','
       << format_double(r.kappa1) << ',' << format_double(r.kappa2) << ',' << format_double(r.beta_star_fg) << ','
       << format_double(r.beta_star_db6) << ',' << format_double(r.beta_star_db3) << ',' << err << '\n';
  }
}

}  // namespace cifreg

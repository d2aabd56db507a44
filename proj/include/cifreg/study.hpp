#pragma once

// Monte Carlo rejection-rate study: for each scenario, calibrate the truth and
// the censoring, compute the probability limits, then simulate, fit and test.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cifreg/censoring.hpp"
#include "cifreg/datagen.hpp"
#include "cifreg/direct_binomial.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/fine_gray.hpp"
#include "cifreg/inference.hpp"
#include "cifreg/limits.hpp"
#include "cifreg/parallel.hpp"
#include "cifreg/process_model.hpp"
#include "cifreg/rng.hpp"
#include "json.hpp"

namespace cifreg {

enum class TruthFamily { intensity, cif };

/// Table columns, in output order.
inline const std::vector<std::string>& study_test_columns() {
  static const std::vector<std::string> cols{"T_LR_l1",   "T_Cox_l1", "T_Cox_l1l2", "T_Gray_F1",
                                             "T_FG_F1",   "T_DB6_F1", "T_DB3_F1"};
  return cols;
}

struct StudyConfig {
  TruthFamily family = TruthFamily::intensity;
  // Intensity family: lambda_0k(t|X) = kappa_k lambda_k (lambda_k t)^{kappa_k - 1} exp(gamma_k X).
  std::vector<double> exp_g1{1.0};
  std::vector<double> exp_g2{1.0};
  double p_event = 0.6;
  double p1 = 0.6;
  double kappa1 = 1.0, kappa2 = 1.0;
  // CIF family.
  std::vector<double> exp_b{1.0};
  std::vector<double> exp_b2{1.0};
  CifVariant variant = CifVariant::extended;
  double f1_at_tau = 0.36;

  double tau = 1.0;
  double p_x1 = 0.5;
  int n = 1000;
  int n_sim = 1000;
  std::vector<std::string> tests = study_test_columns();
  double omega = 0.05;
  double pi_r = 0.2;
  bool stratify_censoring = false;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;

  void validate() const {
    if (n < 10) throw ConfigError("study: n must be >= 10");
    if (n_sim < 1) throw ConfigError("study: n_sim must be >= 1");
    if (!(omega > 0.0 && omega < 1.0)) throw ConfigError("study: omega must lie in (0,1)");
    if (!(pi_r >= 0.0 && pi_r < 1.0)) throw ConfigError("study: pi_r must lie in [0,1)");
    if (!(p_x1 > 0.0 && p_x1 < 1.0)) throw ConfigError("study: p_x1 must lie in (0,1)");
    for (const auto& t : tests) {
      bool known = false;
      for (const auto& c : study_test_columns()) known = known || c == t;
      if (!known) throw ConfigError("study: unknown test '" + t + "'");
    }
    const auto& a = family == TruthFamily::intensity ? exp_g1 : exp_b;
    const auto& b = family == TruthFamily::intensity ? exp_g2 : exp_b2;
    if (a.empty() || b.empty()) throw ConfigError("study: empty scenario sweep");
  }
};

struct TestTally {
  int rejections = 0;
  int failures = 0;
  int used = 0;
  double rate() const { return used > 0 ? static_cast<double>(rejections) / used : NAN; }
  double mc_se() const {
    const double p = rate();
    return used > 0 ? std::sqrt(p * (1.0 - p) / used) : NAN;
  }
};

struct ScenarioResult {
  double key_row = 1.0;  ///< exp_g2 or exp_b2
  double key_col = 1.0;  ///< exp_g1 or exp_b
  double censoring_rate = 0.0;
  double bstar_fg = NAN, bstar_db6 = NAN, bstar_db3 = NAN;
  std::map<std::string, TestTally> tests;
  double mean_beta_fg = NAN, mean_beta_db6 = NAN;
  int failed_replicates = 0;
  int n_sim = 0;
  bool flagged = false;
  std::string error;
};

struct StudyResult {
  TruthFamily family = TruthFamily::intensity;
  std::vector<std::string> tests;
  std::vector<ScenarioResult> rows;
};

namespace detail {

struct ReplicateOutcome {
  std::map<std::string, int> reject;  ///< 1 reject, 0 accept, -1 failed
  double beta_fg = NAN, beta_db6 = NAN;
};

inline ReplicateOutcome run_replicate(const Truth& truth, const StudyConfig& cfg, double rho,
                                      std::uint64_t scenario_seed, std::uint64_t replicate) {
  ReplicateOutcome out;
  const Dataset data = generate_dataset(truth, cfg.n, {rho, cfg.tau}, scenario_seed, replicate, cfg.p_x1);
  auto wanted = [&](const std::string& t) {
    return std::find(cfg.tests.begin(), cfg.tests.end(), t) != cfg.tests.end();
  };
  auto record = [&](const std::string& name, auto&& run) {
    if (!wanted(name)) return;
    try {
      out.reject[name] = run().rejects(cfg.omega) ? 1 : 0;
    } catch (const Error&) {
      out.reject[name] = -1;
    }
  };
  record("T_LR_l1", [&] { return logrank_cause(data, 1); });
  record("T_Cox_l1", [&] { return cox_wald(fit_cox_csh(data, 1)); });
  record("T_Cox_l1l2", [&] { return joint_cox_wald(data); });
  std::optional<CensoringModel> cens;
  try {
    cens = km_censoring(data, cfg.stratify_censoring);
  } catch (const Error&) {
  }
  auto needs_cens = [&](auto&& run) {
    return [&, run]() {
      if (!cens) throw NumericalError("censoring estimate unavailable");
      return run();
    };
  };
  record("T_Gray_F1", needs_cens([&] { return gray_test(data, *cens); }));
  record("T_FG_F1", needs_cens([&] {
           const FgFit f = fg_fit(data, *cens);
           out.beta_fg = f.beta_hat;
           return wald_cif(f);
         }));
  for (int R : {6, 3}) {
    const std::string name = "T_DB" + std::to_string(R) + "_F1";
    record(name, needs_cens([&, R] {
             const DbFit f = db_fit(data, *cens, default_grid(R, cfg.tau));
             if (R == 6) out.beta_db6 = f.beta_hat;
             return wald_cif(f);
           }));
  }
  return out;
}

inline Truth scenario_truth(const StudyConfig& cfg, double row, double col) {
  if (cfg.family == TruthFamily::intensity)
    return make_intensity_model(cfg.p_event, cfg.p1, col, row, cfg.kappa1, cfg.kappa2, cfg.tau);
  CifGenerativeModel m;
  m.q = cif_q_for_incidence(cfg.f1_at_tau, cfg.tau);
  m.beta = std::log(col);
  m.variant = cfg.variant;
  if (cfg.variant == CifVariant::extended) m.beta2 = std::log(row);
  m.validate();
  return m;
}

}  // namespace detail

/// Deterministic given cfg.seed, whatever cfg.threads is.
inline StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyResult result;
  result.family = cfg.family;
  result.tests = cfg.tests;
  const bool intensity = cfg.family == TruthFamily::intensity;
  const auto& rows = intensity ? cfg.exp_g2 : cfg.exp_b2;
  const auto& cols = intensity ? cfg.exp_g1 : cfg.exp_b;
  std::uint64_t scenario_index = 0;
  for (double row : rows) {
    for (double col : cols) {
      const std::uint64_t scenario_seed = mix64(cfg.seed ^ mix64(++scenario_index));
      ScenarioResult sr;
      sr.key_row = row;
      sr.key_col = col;
      sr.n_sim = cfg.n_sim;
      try {
        const Truth truth = detail::scenario_truth(cfg, row, col);
        sr.censoring_rate = calibrate_censoring_rate(truth, cfg.pi_r, cfg.tau, cfg.p_x1);
        const LimitOptions lo{cfg.p_x1, cfg.tau, sr.censoring_rate};
        sr.bstar_fg = limit_fg(truth, lo).beta_star;
        sr.bstar_db6 = limit_db(truth, default_grid(6, cfg.tau), lo).beta_star;
        sr.bstar_db3 = limit_db(truth, default_grid(3, cfg.tau), lo).beta_star;
        std::vector<detail::ReplicateOutcome> reps(static_cast<std::size_t>(cfg.n_sim));
        parallel_for(reps.size(), cfg.threads, [&](std::size_t r) {
          reps[r] = detail::run_replicate(truth, cfg, sr.censoring_rate, scenario_seed, r);
        });
        for (const auto& t : cfg.tests) sr.tests[t];
        double sum_fg = 0.0, sum_db = 0.0;
        int n_fg = 0, n_db = 0;
        for (const auto& rep : reps) {
          bool failed = false;
          for (const auto& [name, v] : rep.reject) {
            auto& tally = sr.tests[name];
            if (v < 0) {
              ++tally.failures;
              failed = true;
            } else {
              ++tally.used;
              tally.rejections += v;
            }
          }
          if (failed) ++sr.failed_replicates;
          if (std::isfinite(rep.beta_fg)) sum_fg += rep.beta_fg, ++n_fg;
          if (std::isfinite(rep.beta_db6)) sum_db += rep.beta_db6, ++n_db;
        }
        if (n_fg > 0) sr.mean_beta_fg = sum_fg / n_fg;
        if (n_db > 0) sr.mean_beta_db6 = sum_db / n_db;
        sr.flagged = sr.failed_replicates >= 0.01 * cfg.n_sim;
      } catch (const Error& e) {
        sr.error = e.what();
        sr.flagged = true;
      }
      result.rows.push_back(std::move(sr));
    }
  }
  return result;
}

enum class TableFormat { csv, json, markdown };

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Layout of the rejection-rate tables: scenario keys, one column per test,
/// then the probability limits.
inline void emit_table(const StudyResult& result, TableFormat format, std::ostream& os) {
  const bool intensity = result.family == TruthFamily::intensity;
  std::vector<std::string> header{intensity ? "exp_g2" : "exp_b2", intensity ? "exp_g1" : "exp_b"};
  for (const auto& c : study_test_columns()) header.push_back(c);
  for (const char* c : {"bstar_fg", "bstar_db6", "bstar_db3"}) header.emplace_back(c);
  auto cells = [&](const ScenarioResult& r) {
    std::vector<std::string> v{format_number(r.key_row), format_number(r.key_col)};
    for (const auto& c : study_test_columns()) {
      const auto it = r.tests.find(c);
      v.push_back(it == r.tests.end() ? "" : format_number(it->second.rate()));
    }
    for (double b : {r.bstar_fg, r.bstar_db6, r.bstar_db3}) v.push_back(format_number(b));
    return v;
  };
  if (format == TableFormat::csv) {
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : result.rows) {
      const auto v = cells(r);
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
      os << '\n';
    }
  } else if (format == TableFormat::markdown) {
    os << '|';
    for (const auto& h : header) os << ' ' << h << " |";
    os << "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& r : result.rows) {
      os << '|';
      for (const auto& c : cells(r)) os << ' ' << c << " |";
      os << '\n';
    }
  } else {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : result.rows) {
      const auto v = cells(r);
      nlohmann::ordered_json row;
      for (std::size_t i = 0; i < header.size(); ++i)
        row[header[i]] = v[i].empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(std::stod(v[i]));
      nlohmann::ordered_json se, fails;
      for (const auto& [name, t] : r.tests) {
        se[name] = std::isfinite(t.mc_se()) ? nlohmann::ordered_json(t.mc_se()) : nlohmann::ordered_json(nullptr);
        fails[name] = t.failures;
      }
      row["mc_se"] = se;
      row["failures"] = fails;
      row["failed_replicates"] = r.failed_replicates;
      row["n_sim"] = r.n_sim;
      row["censoring_rate"] = r.censoring_rate;
      row["flagged"] = r.flagged;
      if (!r.error.empty()) row["error"] = r.error;
      rows.push_back(row);
    }
    os << rows.dump(2) << '\n';
  }
}

}  // namespace cifreg

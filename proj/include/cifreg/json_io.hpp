#pragma once

// JSON configuration parsing and result serialization.

#include <set>
#include <string>
#include <vector>

#include "cifreg/direct_binomial.hpp"
#include "cifreg/errors.hpp"
#include "cifreg/fine_gray.hpp"
#include "cifreg/inference.hpp"
#include "cifreg/limits.hpp"
#include "cifreg/process_model.hpp"
#include "cifreg/study.hpp"
#include "json.hpp"

namespace cifreg {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(what + ": unknown key '" + k + "'");
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

/// Scalar or array of numbers.
inline std::vector<double> get_list(const Json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  try {
    if (v.is_number()) return {v.get<double>()};
    return v.get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

inline CifVariant parse_variant(const std::string& s) {
  if (s == "extended") return CifVariant::extended;
  if (s == "beyersmann") return CifVariant::beyersmann;
  throw ConfigError("unknown CIF variant '" + s + "'");
}

}  // namespace detail

/// A single truth plus its censoring, as used by `simulate`.
struct TruthConfig {
  Truth truth;
  double tau = 1.0;
  double p_x1 = 0.5;
  double censoring_rate = 0.0;
};

inline TruthConfig parse_truth_config(const Json& j) {
  detail::reject_unknown_keys(j,
                              {"family", "p_event", "p1", "exp_g1", "exp_g2", "kappa1", "kappa2", "causes", "variant",
                               "q", "f1_at_tau", "exp_b", "exp_b2", "tau", "p_x1", "pi_r", "censoring_rate"},
                              "truth config");
  TruthConfig c;
  c.tau = detail::get_or(j, "tau", 1.0);
  c.p_x1 = detail::get_or(j, "p_x1", 0.5);
  const std::string family = detail::get_or<std::string>(j, "family", "intensity");
  try {
    if (family == "intensity") {
      if (j.contains("causes")) {
        IntensityModel m;
        const auto& cs = j.at("causes");
        if (!cs.is_array() || cs.size() != 2) throw ConfigError("'causes' must list two causes");
        for (std::size_t k = 0; k < 2; ++k) {
          detail::reject_unknown_keys(cs[k], {"shape", "rate", "log_hr"}, "cause");
          m.causes[k] = {detail::get_or(cs[k], "shape", 1.0), detail::get_or(cs[k], "rate", 1.0),
                         detail::get_or(cs[k], "log_hr", 0.0)};
        }
        m.tau = c.tau;
        m.validate();
        c.truth = m;
      } else {
        c.truth = make_intensity_model(detail::get_or(j, "p_event", 0.6), detail::get_or(j, "p1", 0.6),
                                       detail::get_or(j, "exp_g1", 1.0), detail::get_or(j, "exp_g2", 1.0),
                                       detail::get_or(j, "kappa1", 1.0), detail::get_or(j, "kappa2", 1.0), c.tau);
      }
    } else if (family == "cif") {
      CifGenerativeModel m;
      m.variant = detail::parse_variant(detail::get_or<std::string>(j, "variant", "extended"));
      m.q = j.contains("q") ? detail::get_or(j, "q", 0.5)
                            : cif_q_for_incidence(detail::get_or(j, "f1_at_tau", 0.36), c.tau);
      m.beta = std::log(detail::get_or(j, "exp_b", 1.0));
      if (j.contains("exp_b2")) m.beta2 = std::log(detail::get_or(j, "exp_b2", 1.0));
      m.validate();
      c.truth = m;
    } else {
      throw ConfigError("unknown truth family '" + family + "'");
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("censoring_rate")) {
    c.censoring_rate = detail::get_or(j, "censoring_rate", 0.0);
    if (!(c.censoring_rate >= 0.0)) throw ConfigError("censoring_rate must be >= 0");
  } else {
    c.censoring_rate = calibrate_censoring_rate(c.truth, detail::get_or(j, "pi_r", 0.2), c.tau, c.p_x1);
  }
  return c;
}

inline StudyConfig parse_study_config(const Json& j) {
  detail::reject_unknown_keys(j,
                              {"family", "exp_g1", "exp_g2", "p_event", "p1", "kappa1", "kappa2", "exp_b", "exp_b2",
                               "variant", "f1_at_tau", "tau", "p_x1", "n", "n_sim", "tests", "omega", "pi_r",
                               "stratify_censoring", "seed", "threads"},
                              "study config");
  StudyConfig c;
  const std::string family = detail::get_or<std::string>(j, "family", "intensity");
  if (family == "intensity") c.family = TruthFamily::intensity;
  else if (family == "cif") c.family = TruthFamily::cif;
  else throw ConfigError("unknown truth family '" + family + "'");
  c.exp_g1 = detail::get_list(j, "exp_g1", c.exp_g1);
  c.exp_g2 = detail::get_list(j, "exp_g2", c.exp_g2);
  c.p_event = detail::get_or(j, "p_event", c.p_event);
  c.p1 = detail::get_or(j, "p1", c.p1);
  c.kappa1 = detail::get_or(j, "kappa1", c.kappa1);
  c.kappa2 = detail::get_or(j, "kappa2", c.kappa2);
  c.exp_b = detail::get_list(j, "exp_b", c.exp_b);
  c.exp_b2 = detail::get_list(j, "exp_b2", c.exp_b2);
  c.variant = detail::parse_variant(detail::get_or<std::string>(j, "variant", "extended"));
  c.f1_at_tau = detail::get_or(j, "f1_at_tau", c.f1_at_tau);
  c.tau = detail::get_or(j, "tau", c.tau);
  c.p_x1 = detail::get_or(j, "p_x1", c.p_x1);
  c.n = detail::get_or(j, "n", c.n);
  c.n_sim = detail::get_or(j, "n_sim", c.n_sim);
  if (j.contains("tests")) {
    const auto& t = j.at("tests");
    if (t.is_string() && t.get<std::string>() == "all") c.tests = study_test_columns();
    else c.tests = detail::get_or(j, "tests", c.tests);
  }
  c.omega = detail::get_or(j, "omega", c.omega);
  c.pi_r = detail::get_or(j, "pi_r", c.pi_r);
  c.stratify_censoring = detail::get_or(j, "stratify_censoring", c.stratify_censoring);
  c.seed = detail::get_or(j, "seed", c.seed);
  c.threads = detail::get_or(j, "threads", c.threads);
  c.validate();
  return c;
}

inline SweepSpec parse_sweep_spec(const Json& j) {
  detail::reject_unknown_keys(j, {"exp_g1", "exp_g2", "p1", "kappa1", "kappa2", "p_event", "tau", "p_x1", "pi_r"},
                              "limits config");
  SweepSpec s;
  s.exp_g1 = detail::get_list(j, "exp_g1", s.exp_g1);
  s.exp_g2 = detail::get_list(j, "exp_g2", s.exp_g2);
  s.p1 = detail::get_list(j, "p1", s.p1);
  s.kappa1 = detail::get_list(j, "kappa1", s.kappa1);
  s.kappa2 = detail::get_list(j, "kappa2", s.kappa2);
  s.p_event = detail::get_or(j, "p_event", s.p_event);
  s.tau = detail::get_or(j, "tau", s.tau);
  s.p_x1 = detail::get_or(j, "p_x1", s.p_x1);
  s.censoring_target = detail::get_or(j, "pi_r", s.censoring_target);
  return s;
}

inline Json to_json(const FgFit& f) {
  Json j;
  j["beta_hat"] = f.beta_hat;
  j["se_naive"] = f.se_naive;
  j["se_robust"] = f.se_robust;
  j["n_events"] = f.n_events;
  j["iterations"] = f.convergence.iterations;
  j["score_norm"] = f.convergence.score_norm;
  Json b = Json::array();
  for (std::size_t k = 0; k < f.breslow.time.size(); ++k)
    b.push_back({{"t", f.breslow.time[k]}, {"dGamma", f.breslow.increment[k]}});
  j["breslow"] = b;
  return j;
}

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline Json to_json(const DbFit& f) {
  Json j;
  j["grid"] = f.grid;
  j["alpha_hat"] = f.alpha_hat;
  j["beta_hat"] = f.beta_hat;
  j["se_robust"] = f.se_robust;
  j["cov"] = matrix_json(f.covariance);
  j["n_boot"] = f.n_boot;
  j["iterations"] = f.convergence.iterations;
  if (!f.warnings.empty()) j["warnings"] = f.warnings;
  j["monotonicity_violations"] = f.monotonicity_violations;
  return j;
}

inline Json to_json(const TestResult& t) {
  return {{"name", std::string(to_string(t.name))}, {"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}};
}

inline Json to_json(const BaselineRates& b) {
  return {{"rate1", b.rate1}, {"rate2", b.rate2}};
}

inline std::string dump(const Json& j) { return j.dump(2); }

}  // namespace cifreg

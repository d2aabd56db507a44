#include <cifreg.hpp>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace cifreg;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Dataset read_data_file(const std::string& path, double tau) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return read_csv(in, tau);
  } catch (const DomainError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Writes through `body` to the file, or to stdout for an empty path.
template <class Body>
void write_output(const std::string& path, Body&& body) {
  if (path.empty()) {
    body(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  body(out);
  if (!out) throw ConfigError("write failed for " + path);
}

TimeFunction parse_b(const std::string& s) {
  if (s == "t") return TimeFunction::t;
  if (s == "log_t" || s == "logt") return TimeFunction::log_t;
  throw ConfigError("unknown b(t) '" + s + "' (expected t or log_t)");
}

std::vector<double> grid_or_default(const std::vector<double>& grid, int R, double tau) {
  return grid.empty() ? default_grid(R, tau) : checked_grid(grid, tau);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cumulative incidence regression under competing risks: fitting, limits and simulation studies"};
  app.require_subcommand(1);

  // calibrate
  double pT = 0.6, p1 = 0.6, kappa1 = 1.0, kappa2 = 1.0, tau = 1.0;
  auto* calibrate = app.add_subcommand("calibrate", "Baseline rates for P(T<=tau|X=0) and P(T1<T2|T<=tau,X=0)");
  calibrate->add_option("--pT", pT, "P(T <= tau | X=0)");
  calibrate->add_option("--p1", p1, "P(T1 < T2 | T <= tau, X=0)");
  calibrate->add_option("--kappa1", kappa1, "Weibull shape of cause 1");
  calibrate->add_option("--kappa2", kappa2, "Weibull shape of cause 2");
  calibrate->add_option("--tau", tau, "Administrative censoring time");

  // limits
  std::string config, out, data_path;
  unsigned threads = 1;
  auto* limits = app.add_subcommand("limits", "Probability-limit sweep to CSV");
  limits->add_option("--config", config, "Sweep JSON")->required();
  limits->add_option("--out", out, "Output CSV (stdout if omitted)");
  limits->add_option("--threads", threads, "Worker threads (0 = all cores)");

  // simulate
  int n = 1000;
  std::uint64_t seed = 1, replicate = 0;
  auto* simulate = app.add_subcommand("simulate", "Simulate one dataset");
  simulate->add_option("--config", config, "Truth JSON")->required();
  simulate->add_option("--n", n, "Number of subjects");
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--replicate", replicate, "Replicate index within the seed");
  simulate->add_option("--out", out, "Output CSV (stdout if omitted)");

  // fit
  std::string method = "fg", variance = "influence";
  std::vector<double> grid;
  int R = 6, n_boot = 500;
  bool stratify = false;
  auto* fit = app.add_subcommand("fit", "Fit the cloglog CIF model by Fine-Gray or direct binomial regression");
  fit->add_option("--method", method, "fg or db")->check(CLI::IsMember({"fg", "db"}));
  fit->add_option("--data", data_path, "Data CSV (id,time,status,x)")->required();
  fit->add_option("--tau", tau, "Administrative censoring time");
  fit->add_option("--grid", grid, "DB grid points")->delimiter(',');
  fit->add_option("--R", R, "Number of equi-spaced DB grid points when --grid is absent");
  fit->add_flag("--stratify", stratify, "Estimate censoring separately per arm");
  fit->add_option("--variance", variance, "influence or bootstrap")->check(CLI::IsMember({"influence", "bootstrap"}));
  fit->add_option("--n-boot", n_boot, "Bootstrap resamples");
  fit->add_option("--seed", seed, "Bootstrap seed");
  fit->add_option("--out", out, "Output JSON (stdout if omitted)");

  // test
  std::vector<std::string> tests{"all"};
  int contrast_boot = 200;
  std::string b_name = "log_t";
  auto* test = app.add_subcommand("test", "Run hypothesis tests on a dataset");
  test->add_option("--data", data_path, "Data CSV")->required();
  test->add_option("--tau", tau, "Administrative censoring time");
  test->add_option("--tests", tests, "Test names or 'all'")->delimiter(',');
  test->add_option("--b", b_name, "b(t) for the time-varying effect tests: t or log_t");
  test->add_option("--R", R, "DB grid size");
  test->add_option("--n-boot", contrast_boot, "Bootstrap resamples for the contrast test");
  test->add_option("--seed", seed, "Bootstrap seed");
  test->add_flag("--stratify", stratify, "Estimate censoring separately per arm");
  test->add_option("--out", out, "Output JSON (stdout if omitted)");

  // study
  int reps = 0;
  std::string format = "csv";
  auto* study = app.add_subcommand("study", "Monte Carlo rejection-rate study");
  study->add_option("--config", config, "Study JSON")->required();
  study->add_option("--reps", reps, "Override n_sim");
  study->add_option("--threads", threads, "Worker threads (0 = all cores)");
  study->add_option("--format", format, "csv, json or markdown")->check(CLI::IsMember({"csv", "json", "markdown"}));
  study->add_option("--out", out, "Output table (stdout if omitted)");

  // samplesize
  double omega = 0.05, power = 0.8, beta1 = std::log(0.8), pobs = 0.5, px1 = 0.5;
  auto* samplesize = app.add_subcommand("samplesize", "Sample size for a cause-1 effect");
  samplesize->add_option("--omega", omega, "Two-sided level");
  samplesize->add_option("--power", power, "Target power");
  samplesize->add_option("--beta1", beta1, "Log hazard ratio to detect");
  samplesize->add_option("--pobs", pobs, "Proportion of observed cause-1 events");
  samplesize->add_option("--px1", px1, "P(X=1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*calibrate) {
      const auto rates = calibrate_baseline(pT, p1, kappa1, kappa2, tau);
      std::cout << dump(to_json(rates)) << '\n';
    } else if (*limits) {
      const SweepSpec spec = parse_sweep_spec(read_json_file(config));
      const auto rows = limit_grid_sweep(spec, threads);
      write_output(out, [&](std::ostream& os) { write_sweep_csv(os, rows); });
    } else if (*simulate) {
      const TruthConfig tc = parse_truth_config(read_json_file(config));
      const Dataset d = generate_dataset(tc.truth, n, {tc.censoring_rate, tc.tau}, seed, replicate, tc.p_x1);
      write_output(out, [&](std::ostream& os) { write_csv(os, d); });
    } else if (*fit) {
      const Dataset d = read_data_file(data_path, tau);
      const CensoringModel cens = km_censoring(d, stratify);
      const VarianceMethod vm = variance == "bootstrap" ? VarianceMethod::bootstrap : VarianceMethod::influence;
      Json j;
      if (method == "fg") {
        FgFit f = fg_fit(d, cens);
        if (vm == VarianceMethod::bootstrap) f.se_robust = fg_robust_variance(f, d, cens, vm, n_boot, seed);
        j = to_json(f);
        j["method"] = "fg";
        j["variance"] = variance;
      } else {
        DbFit f = db_fit(d, cens, grid_or_default(grid, R, tau));
        if (vm == VarianceMethod::bootstrap) {
          f.covariance = db_robust_variance(f, d, cens, vm, n_boot, seed);
          f.se_robust = std::sqrt(f.covariance(f.covariance.rows() - 1, f.covariance.cols() - 1));
          f.n_boot = n_boot;
        }
        for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
        j = to_json(f);
        j["method"] = "db";
        j["variance"] = variance;
      }
      write_output(out, [&](std::ostream& os) { os << dump(j) << '\n'; });
    } else if (*test) {
      const Dataset d = read_data_file(data_path, tau);
      const CensoringModel cens = km_censoring(d, stratify);
      const TimeFunction b = parse_b(b_name);
      const std::vector<double> g = default_grid(R, tau);
      std::vector<std::string> names = tests;
      if (names.size() == 1 && names[0] == "all")
        names = {"T_LR_l1", "T_Cox_l1", "T_Cox_l1l2", "T_Gray_F1", "T_FG_F1",
                 "T_DB_F1", "GOF_FG_Wald", "GOF_DB_Wald", "GOF_DB_Contrast"};
      Json rows = Json::array();
      for (const auto& name : names) {
        TestResult r;
        if (name == "T_LR_l1") r = logrank_cause(d, 1);
        else if (name == "T_Cox_l1") r = cox_wald(fit_cox_csh(d, 1));
        else if (name == "T_Cox_l1l2") r = joint_cox_wald(d);
        else if (name == "T_Gray_F1") r = gray_test(d, cens);
        else if (name == "T_FG_F1") r = wald_cif(fg_fit(d, cens));
        else if (name == "T_DB_F1") r = wald_cif(db_fit(d, cens, g));
        else if (name == "GOF_FG_Wald") r = gof_fg_wald(d, cens, b);
        else if (name == "GOF_DB_Wald") r = gof_db_wald(db_fit_extended(d, cens, g, b));
        else if (name == "GOF_DB_Contrast") r = gof_db_contrast(db_fit_unconstrained(d, cens, g, contrast_boot, seed));
        else throw ConfigError("unknown test '" + name + "'");
        rows.push_back(to_json(r));
      }
      write_output(out, [&](std::ostream& os) { os << dump(rows) << '\n'; });
    } else if (*study) {
      StudyConfig cfg = parse_study_config(read_json_file(config));
      if (reps > 0) cfg.n_sim = reps;
      if (study->count("--threads")) cfg.threads = threads;
      const StudyResult res = run_study(cfg);
      const TableFormat tf = format == "json" ? TableFormat::json
                             : format == "markdown" ? TableFormat::markdown
                                                    : TableFormat::csv;
      write_output(out, [&](std::ostream& os) { emit_table(res, tf, os); });
    } else if (*samplesize) {
      std::cout << latouche_sample_size(omega, 1.0 - power, beta1, px1, pobs) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}

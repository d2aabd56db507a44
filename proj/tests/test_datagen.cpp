#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cifreg/datagen.hpp"

using namespace cifreg;

namespace {

IntensityModel table_one_null() { return make_intensity_model(0.6, 0.6, 1.0, 1.0); }

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

}  // namespace

TEST(IntensityPaths, BaselineProbabilities) {
  const auto m = table_one_null();
  const int n = 100000;
  int by_tau = 0, c1 = 0;
  for (int i = 0; i < n; ++i) {
    RandomStream rng(5, 1, static_cast<std::uint64_t>(i));
    const auto ev = draw_intensity_path(m, 0, rng);
    if (ev.time <= 1.0) {
      ++by_tau;
      c1 += ev.cause == 1;
    }
  }
  EXPECT_NEAR(static_cast<double>(by_tau) / n, 0.6, 0.005);
  EXPECT_NEAR(static_cast<double>(c1) / by_tau, 0.6, 0.005);
}

TEST(IntensityPaths, NoCompetingHazard) {
  IntensityModel m;
  m.causes = {CauseIntensity{1.3, 0.8, 0.0}, CauseIntensity{1.0, 0.0, 0.0}};
  for (int i = 0; i < 500; ++i) {
    RandomStream rng(3, 0, static_cast<std::uint64_t>(i));
    EXPECT_EQ(draw_intensity_path(m, i % 2, rng).cause, 1);
  }
}

TEST(IntensityPaths, DeterministicForSeed) {
  const auto m = table_one_null();
  RandomStream a(17, 2, 3), b(17, 2, 3);
  const auto x = draw_intensity_path(m, 1, a), y = draw_intensity_path(m, 1, b);
  EXPECT_EQ(x.time, y.time);
  EXPECT_EQ(x.cause, y.cause);
}

TEST(IntensityPaths, EventTimesFollowSurvivalLaw) {
  const auto m = make_intensity_model(0.6, 0.6, 1.0, 1.0, 1.4, 0.8);
  const int n = 100000;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    RandomStream rng(8, 0, static_cast<std::uint64_t>(i));
    t[i] = draw_intensity_path(m, 0, rng).time;
  }
  EXPECT_LT(ks_distance(t, [&](double s) { return 1.0 - m.survival(s, 0); }), 1.63 / std::sqrt(n));
}

TEST(CifPaths, InversionAtUnitTime) {
  const CifGenerativeModel m{cif_q_for_incidence(0.36), std::log(0.8), 0.8, CifVariant::extended};
  EXPECT_NEAR(invert_cif_total(m, 0, 1.0 - std::exp(-1.0)), 1.0, 1e-12);
}

TEST(CifPaths, CauseProbabilityInControlArm) {
  const double q = cif_q_for_incidence(0.36);
  const CifGenerativeModel m{q, std::log(0.8), 0.8, CifVariant::extended};
  for (double t : {0.1, 0.7, 2.5}) {
    const auto v = eval_cif_model(m, t, 0);
    EXPECT_NEAR(v.f1 / (v.f1 + v.f2), q, 1e-14);
  }
  const int n = 100000;
  int c1 = 0;
  for (int i = 0; i < n; ++i) {
    RandomStream rng(11, 0, static_cast<std::uint64_t>(i));
    c1 += draw_cif_path(m, 0, rng).cause == 1;
  }
  EXPECT_NEAR(static_cast<double>(c1) / n, q, 3 * std::sqrt(q * (1 - q) / n));
}

TEST(CifPaths, NoEffectGivesEqualArms) {
  const CifGenerativeModel m{cif_q_for_incidence(0.36), 0.0, 0.0, CifVariant::extended};
  const int n = 100000;
  int f[2] = {0, 0};
  for (int x = 0; x <= 1; ++x)
    for (int i = 0; i < n; ++i) {
      RandomStream rng(12, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(i));
      const auto ev = draw_cif_path(m, x, rng);
      f[x] += ev.cause == 1 && ev.time <= 1.0;
    }
  const double p0 = static_cast<double>(f[0]) / n, p1 = static_cast<double>(f[1]) / n;
  EXPECT_NEAR(p0 - p1, 0.0, 3 * std::sqrt(2 * 0.36 * 0.64 / n));
}

TEST(CifPaths, TotalTimeLawInTreatedArm) {
  const CifGenerativeModel m{cif_q_for_incidence(0.36), std::log(0.8), std::log(0.8), CifVariant::extended};
  const int n = 100000;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    RandomStream rng(13, 0, static_cast<std::uint64_t>(i));
    t[i] = draw_cif_path(m, 1, rng).time;
  }
  EXPECT_LT(ks_distance(t,
                        [&](double s) {
                          const auto v = eval_cif_model(m, s, 1);
                          return v.F1 + v.F2;
                        }),
            1.63 / std::sqrt(n));
}

TEST(CensoringCalibration, ZeroTarget) { EXPECT_EQ(calibrate_censoring_rate(table_one_null(), 0.0, 1.0), 0.0); }

TEST(CensoringCalibration, MonotoneInTarget) {
  const Truth t = table_one_null();
  EXPECT_GT(calibrate_censoring_rate(t, 0.3, 1.0), calibrate_censoring_rate(t, 0.2, 1.0));
}

TEST(CensoringCalibration, SimulatedLossFractionMatchesTarget) {
  const Truth t = table_one_null();
  const double rho = calibrate_censoring_rate(t, 0.2, 1.0);
  const Dataset d = generate_dataset(t, 400000, {rho, 1.0}, 21);
  // Among subjects whose latent path is a cause-1 event by tau, the fraction
  // randomly censored first; regenerate the latent path from the same stream.
  int events = 0, lost = 0;
  for (int i = 0; i < 400000; ++i) {
    RandomStream rng(21, 0, static_cast<std::uint64_t>(i));
    const int x = rng.uniform() < 0.5 ? 1 : 0;
    const double c = -std::log(rng.uniform()) / rho;
    const auto ev = draw_path(t, x, rng);
    if (ev.cause == 1 && ev.time <= 1.0) {
      ++events;
      lost += c < ev.time;
    }
    EXPECT_EQ(d.records[static_cast<std::size_t>(i)].x, x);
  }
  EXPECT_NEAR(static_cast<double>(lost) / events, 0.2, 0.002);
}

TEST(CensoringCalibration, UnreachableTarget) {
  EXPECT_THROW(calibrate_censoring_rate(table_one_null(), 1.0, 1.0), DomainError);
}

TEST(Dataset, ReproducibleCsv) {
  const Truth t = table_one_null();
  std::ostringstream a, b;
  write_csv(a, generate_dataset(t, 1000, {0.5, 1.0}, 42));
  write_csv(b, generate_dataset(t, 1000, {0.5, 1.0}, 42));
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  write_csv(c, generate_dataset(t, 1000, {0.5, 1.0}, 43));
  EXPECT_NE(a.str(), c.str());
}

TEST(Dataset, SubjectDrawsIndependentOfSampleSize) {
  const Truth t = table_one_null();
  const auto small = generate_dataset(t, 100, {0.5, 1.0}, 7, 3);
  const auto large = generate_dataset(t, 1000, {0.5, 1.0}, 7, 3);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small.records[i], large.records[i]);
}

TEST(Dataset, NoCensoringWithLongHorizon) {
  const auto d = generate_dataset(table_one_null(), 2000, {0.0, 1e6}, 1);
  for (const auto& r : d.records) EXPECT_NE(r.status, 0);
}

TEST(Dataset, RecordInvariants) {
  const auto d = generate_dataset(table_one_null(), 5000, {0.6, 1.0}, 2);
  for (const auto& r : d.records) {
    EXPECT_GT(r.time, 0.0);
    EXPECT_LE(r.time, 1.0);
    EXPECT_TRUE(r.status >= 0 && r.status <= 2);
    if (r.status != 0) {
      EXPECT_LE(r.time, 1.0);
    }
  }
}

TEST(Dataset, ControlArmIncidence) {
  const auto d = generate_dataset(table_one_null(), 100000, {0.0, 1.0}, 3);
  int n0 = 0, e0 = 0;
  for (const auto& r : d.records)
    if (r.x == 0) {
      ++n0;
      e0 += r.status == 1;
    }
  EXPECT_NEAR(static_cast<double>(e0) / n0, 0.36, 0.005);
}

TEST(Dataset, CensoringIndependentOfEventTime) {
  const Truth t = table_one_null();
  const int n = 50000;
  double st = 0, sc = 0, stt = 0, scc = 0, stc = 0;
  for (int i = 0; i < n; ++i) {
    RandomStream rng(31, 0, static_cast<std::uint64_t>(i));
    const int x = rng.uniform() < 0.5 ? 1 : 0;
    const double c = -std::log(rng.uniform()) / 0.5;
    const double tt = draw_path(t, x, rng).time;
    if (x != 0) continue;
    st += tt, sc += c, stt += tt * tt, scc += c * c, stc += tt * c;
  }
  const double m = n / 2.0;
  const double cov = stc / m - st / m * sc / m;
  const double corr = cov / std::sqrt((stt / m - st * st / m / m) * (scc / m - sc * sc / m / m));
  EXPECT_LT(std::abs(corr), 3.0 / std::sqrt(m));
}

TEST(Dataset, CsvRoundTrip) {
  const auto d = generate_dataset(table_one_null(), 300, {0.5, 1.0}, 9);
  std::ostringstream os;
  write_csv(os, d);
  std::istringstream is(os.str());
  const auto back = read_csv(is, 1.0);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(back.records[i], d.records[i]);
}

TEST(Dataset, CsvRejectsMalformedInput) {
  std::istringstream bad_header("a,b,c,d\n1,0.5,1,0\n");
  EXPECT_THROW(read_csv(bad_header, 1.0), ConfigError);
  std::istringstream bad_status("id,time,status,x\n1,0.5,3,0\n");
  EXPECT_THROW(read_csv(bad_status, 1.0), DomainError);
}

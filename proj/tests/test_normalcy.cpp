#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "urbanpulse/normalcy.hpp"
#include "urbanpulse/shapiro_wilk.hpp"

using namespace urbanpulse;

namespace {

const SeriesKey kKey{Source::Cdr, "A", 19, DayType::Weekday};

NormalcyModel fit_of(std::vector<double> v) { return fit_samples(kKey, v); }

ScoredObservation obs(Source s, double z) { return {SeriesKey{s, "A", 0, DayType::Weekday}, Date{0}, 0.0, z, 0.0}; }

}  // namespace

TEST(Fit, MeanStdMedian) {
  const auto m = fit_of({2, 4, 6});
  EXPECT_DOUBLE_EQ(m.mean, 4.0);
  EXPECT_DOUBLE_EQ(m.std, 2.0);
  EXPECT_DOUBLE_EQ(m.median, 4.0);
  EXPECT_TRUE(m.scorable());
}

TEST(Fit, ZeroVarianceFlagged) {
  const auto m = fit_of({5, 5, 5, 5});
  EXPECT_EQ(m.std, 0.0);
  EXPECT_TRUE(m.zero_variance());
  EXPECT_THROW(z_score(m, 5.0), DomainError);
}

TEST(Fit, SingleSampleDegenerate) {
  const auto m = fit_of({3});
  EXPECT_TRUE(m.degenerate());
  EXPECT_FALSE(m.scorable());
}

TEST(Fit, QuartilesMatchOracle) {
  const auto m = fit_of({1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_DOUBLE_EQ(m.q1, 2.75);
  EXPECT_DOUBLE_EQ(m.q3, 6.25);
  EXPECT_DOUBLE_EQ(m.iqr(), 3.5);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = oracle::normal_draws(rng, 1 + trial % 37);
    const auto f = fit_of(v);
    EXPECT_DOUBLE_EQ(f.q1, oracle::quantile(v, 0.25));
    EXPECT_DOUBLE_EQ(f.q3, oracle::quantile(v, 0.75));
    EXPECT_DOUBLE_EQ(f.median, oracle::quantile(v, 0.5));
  }
}

TEST(Fit, HolidaysExcluded) {
  SeriesMap s;
  s[kKey] = {kKey, {{Date{0}, 2}, {Date{1}, 4}, {Date{2}, 100}, {Date{3}, 6}}};
  const auto models = fit(s, {Date{2}});
  EXPECT_DOUBLE_EQ(models.at(kKey).mean, 4.0);
  EXPECT_EQ(models.at(kKey).n, 3u);
}

TEST(ZScore, Examples) {
  NormalcyModel m;
  m.n = 10;
  m.mean = 10;
  m.std = 2;
  EXPECT_DOUBLE_EQ(z_score(m, 16), 3.0);
  EXPECT_DOUBLE_EQ(z_score(m, 10), 0.0);
  EXPECT_DOUBLE_EQ(z_score(m, 4), -3.0);
}

TEST(ZScore, AffineEquivariant) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto v = oracle::normal_draws(rng, 12);
    const double value = v[0] * 3 + 1;
    const double z = z_score(fit_of(v), value);
    for (double c : {0.5, 7.0, 1e3}) {
      std::vector<double> w;
      for (double x : v) w.push_back(c * x);
      EXPECT_NEAR(z_score(fit_of(w), c * value), z, 1e-9 * (1 + std::abs(z)));
    }
  }
}

TEST(Normalize, Examples) {
  std::vector<ScoredObservation> o{obs(Source::Cdr, -2), obs(Source::Cdr, 1), obs(Source::Cdr, 4)};
  normalize_scores(o);
  EXPECT_DOUBLE_EQ(o[0].normalized_z, 0.5);
  EXPECT_DOUBLE_EQ(o[1].normalized_z, 0.25);
  EXPECT_DOUBLE_EQ(o[2].normalized_z, 1.0);

  std::vector<ScoredObservation> zeros{obs(Source::Bus, 0), obs(Source::Bus, 0)};
  normalize_scores(zeros);
  EXPECT_EQ(zeros[0].normalized_z, 0.0);
  EXPECT_EQ(zeros[1].normalized_z, 0.0);

  std::vector<ScoredObservation> one{obs(Source::Checkin, -7)};
  normalize_scores(one);
  EXPECT_EQ(one[0].normalized_z, 1.0);
}

TEST(Normalize, PerSourceAndRankPreserving) {
  std::mt19937_64 rng(8);
  std::vector<ScoredObservation> o;
  for (double z : oracle::normal_draws(rng, 40)) o.push_back(obs(Source::Cdr, 3 * z));
  for (double z : oracle::normal_draws(rng, 40)) o.push_back(obs(Source::Bus, z));
  normalize_scores(o);
  for (const auto& a : o) {
    EXPECT_GE(a.normalized_z, 0.0);
    EXPECT_LE(a.normalized_z, 1.0);
    for (const auto& b : o) {
      if (a.key.source != b.key.source) continue;
      if (std::abs(a.z) < std::abs(b.z)) EXPECT_LE(a.normalized_z, b.normalized_z);
    }
  }
}

TEST(ModelsIo, RoundTrip) {
  ModelMap m;
  m.emplace(kKey, fit_of({1.0 / 3, 2.5, 7.125, 9}));
  std::stringstream ss;
  write_models(ss, m);
  const auto back = read_models(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back.at(kKey).std, m.at(kKey).std);
  EXPECT_EQ(back.at(kKey).q1, m.at(kKey).q1);
}

// Reference values from scipy.stats.shapiro.
struct SwCase {
  const char* name;
  std::vector<double> x;
  double w;
  double p;
};

std::vector<SwCase> sw_cases() {
  std::vector<SwCase> c;
  c.push_back({"n3", {1, 2, 4}, 0.9642857142857142, 0.6368868450289689});
  c.push_back({"n5", {2.1, 3.4, 1.9, 5.6, 4.4}, 0.9320849391953863, 0.6106559022604845});
  std::vector<double> v;
  for (int i = 0; i < 11; ++i) v.push_back((i * i % 7) + 0.1 * i);
  c.push_back({"n11", v, 0.9555985334168683, 0.7158590743356386});
  v.clear();
  for (int i = 0; i < 20; ++i) v.push_back(std::sin(1.7 * i) + 0.05 * i);
  c.push_back({"n20", v, 0.9542837957630659, 0.43681153164213804});
  v.clear();
  for (int i = 0; i < 50; ++i) v.push_back(std::exp(std::sin(0.9 * i)));
  c.push_back({"n50", v, 0.8537730783352354, 1.960466561876062e-05});
  v.clear();
  for (int i = 0; i < 200; ++i) v.push_back(std::cos(0.37 * i * i) + 0.01 * i);
  c.push_back({"n200", v, 0.9891640469247296, 0.134555256321081});
  return c;
}

TEST(ShapiroWilk, MatchesReferenceValues) {
  for (const auto& c : sw_cases()) {
    const auto r = shapiro_wilk(c.x);
    EXPECT_NEAR(r.w, c.w, 1e-6) << c.name;
    EXPECT_NEAR(r.p_value, c.p, 1e-4 + 1e-3 * c.p) << c.name;
  }
}

TEST(ShapiroWilk, Errors) {
  EXPECT_THROW(shapiro_wilk(std::vector<double>{3, 3, 3, 3}), DomainError);
  EXPECT_THROW(shapiro_wilk(std::vector<double>{1, 2}), DomainError);
  EXPECT_THROW(shapiro_wilk(std::vector<double>(5001, 1.0)), DomainError);
}

TEST(ShapiroWilk, CalibratedOnNormalData) {
  std::mt19937_64 rng(2024);
  int rejections = 0;
  for (int t = 0; t < 500; ++t) {
    const auto r = shapiro_wilk(oracle::normal_draws(rng, 50));
    EXPECT_GT(r.w, 0.0);
    EXPECT_LE(r.w, 1.0);
    if (r.p_value < 0.05) ++rejections;
  }
  EXPECT_NEAR(rejections / 500.0, 0.05, 0.03);
}

TEST(ShapiroWilk, PowerAgainstExponential) {
  std::mt19937_64 rng(99);
  std::exponential_distribution<double> ex(1.0);
  int rejections = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(50);
    for (auto& x : v) x = ex(rng);
    if (shapiro_wilk(v).p_value < 0.05) ++rejections;
  }
  EXPECT_GT(rejections / 500.0, 0.90);
}

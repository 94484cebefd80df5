#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "urbanpulse/granger.hpp"
#include "urbanpulse/pipeline.hpp"
#include "urbanpulse/simulate.hpp"

using namespace urbanpulse;

namespace {

struct Ar {
  std::vector<double> x, y;
};

// x AR(1); y driven by lagged x
Ar coupled_series() {
  const auto e1 = oracle::lcg_noise(80, 1), e2 = oracle::lcg_noise(80, 2);
  Ar s{std::vector<double>(80), std::vector<double>(80)};
  for (std::size_t i = 0; i < 80; ++i) {
    const double xp = i ? s.x[i - 1] : 0.0, yp = i ? s.y[i - 1] : 0.0;
    s.x[i] = e1[i] + 0.4 * xp;
    s.y[i] = e2[i] + 0.6 * xp + 0.2 * yp;
  }
  return s;
}

struct Ref {
  bool x_to_y;
  int lag;
  double f, p;
  std::size_t df2;
};

// statsmodels grangercausalitytests, ssr_ftest
const Ref kRefs[] = {
    {true, 1, 41.52224882890379, 9.609722331843592e-09, 76},  {false, 1, 0.9253776427858079, 0.3391176494146908, 76},
    {true, 2, 22.05640061723543, 3.215325349047994e-08, 73},  {false, 2, 1.715234108995777, 0.18709251386206813, 73},
    {true, 3, 13.689799074024656, 4.033026114577516e-07, 70}, {false, 3, 0.9445140651456485, 0.4239359412563939, 70},
};

}  // namespace

TEST(Granger, MatchesReferenceValues) {
  const auto s = coupled_series();
  for (const auto& r : kRefs) {
    const auto g = r.x_to_y ? granger_test(s.x, s.y, r.lag) : granger_test(s.y, s.x, r.lag);
    EXPECT_NEAR(g.f_statistic, r.f, 1e-8 * r.f) << r.lag;
    EXPECT_NEAR(g.p_value, r.p, 1e-8 * r.p + 1e-14) << r.lag;
    EXPECT_EQ(g.n_effective - 2 * r.lag - 1, r.df2);
  }
}

TEST(Granger, MatchesOracleRegression) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    auto x = oracle::normal_draws(rng, 60);
    auto y = oracle::normal_draws(rng, 60);
    for (std::size_t i = 1; i < y.size(); ++i) y[i] += 0.3 * x[i - 1];
    for (int lag : {1, 2, 4}) {
      const double f = oracle::granger_f(x, y, static_cast<std::size_t>(lag));
      EXPECT_NEAR(granger_test(x, y, lag).f_statistic, f, 1e-8 * (1 + f));
    }
  }
}

TEST(Granger, StrongCouplingDetected) {
  std::mt19937_64 rng(3);
  const auto x = oracle::normal_draws(rng, 500);
  auto y = oracle::normal_draws(rng, 500);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.1 * y[i] + (i ? 0.9 * x[i - 1] : 0.0);
  EXPECT_LT(granger_test(x, y, 1).p_value, 0.01);
}

TEST(Granger, SizeUnderIndependence) {
  std::mt19937_64 rng(1234);
  int rejections = 0;
  for (int t = 0; t < 200; ++t) {
    const auto x = oracle::normal_draws(rng, 200);
    const auto y = oracle::normal_draws(rng, 200);
    if (granger_test(x, y, 1).p_value < 0.05) ++rejections;
  }
  EXPECT_NEAR(rejections / 200.0, 0.05, 0.04);
}

TEST(Granger, DegenerateInputs) {
  const std::vector<double> c(50, 2.0);
  std::mt19937_64 rng(1);
  const auto y = oracle::normal_draws(rng, 50);
  EXPECT_THROW(granger_test(c, y, 1), DomainError);
  EXPECT_THROW(granger_test(y, y, 1), DomainError);  // duplicated series: singular design
  EXPECT_THROW(granger_test(y, y, 0), DomainError);
  EXPECT_THROW(granger_test(std::vector<double>(5, 1.0), std::vector<double>(5, 1.0), 1), DomainError);
}

TEST(Granger, PairwiseCounts) {
  std::mt19937_64 rng(9);
  std::map<std::string, std::vector<double>> two{{"a", oracle::normal_draws(rng, 40)}, {"b", oracle::normal_draws(rng, 40)}};
  EXPECT_EQ(pairwise_granger(two, 1).results.size(), 2u);
  two["c"] = oracle::normal_draws(rng, 40);
  const auto three = pairwise_granger(two, 1);
  EXPECT_EQ(three.results.size(), 6u);
  const auto summary = summarize_granger(three.results);
  EXPECT_EQ(summary.size(), 6u);
  two["d"] = std::vector<double>(40, 1.0);
  EXPECT_EQ(pairwise_granger(two, 1).failed.size(), 6u);
}

TEST(Granger, SummaryMeanAndStd) {
  std::vector<GrangerResult> r(3);
  const double ps[] = {0.1, 0.2, 0.6};
  for (int i = 0; i < 3; ++i) {
    r[i].x_label = "a";
    r[i].y_label = "b";
    r[i].p_value = ps[i];
  }
  const auto s = summarize_granger(r);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].mean_p, 0.3, 1e-12);
  EXPECT_NEAR(s[0].std_p, std::sqrt((0.04 + 0.01 + 0.09) / 2), 1e-12);
  EXPECT_EQ(s[0].count, 3u);
}

TEST(Granger, LeadingModalityCausesLaggingOne) {
  const auto out = sim::generate(sim::scenario_lead_time_split(7));
  RawDataset raw{out.cdr, out.bus, out.taxi, out.checkins};
  const auto table = compute_occupancy(raw, out.zones, {}).table;
  const std::string zone = sim::Grid::zone_id(2, 3);
  const auto bus = pipeline::zone_series(table, Source::Bus, 15, out.zones, out.stops).at(zone);
  const auto taxi = pipeline::zone_series(table, Source::TaxiDropoff, 15, out.zones, out.stops).at(zone);
  ASSERT_TRUE(bus && taxi);
  const auto fwd = granger_test(*bus, *taxi, 4, "BUS", "TAXI_DROPOFF");
  EXPECT_LT(fwd.p_value, 0.05);
  EXPECT_NEAR(fwd.f_statistic, oracle::granger_f(*bus, *taxi, 4), 1e-6 * fwd.f_statistic);
}

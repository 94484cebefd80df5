#include <gtest/gtest.h>

#include "urbanpulse/config.hpp"

using namespace urbanpulse;

TEST(Config, Defaults) {
  const PipelineConfig c;
  EXPECT_EQ(c.z_threshold, 3.0);
  EXPECT_EQ(c.iqr_multiplier, 1.5);
  EXPECT_EQ(c.esd.alpha, 0.05);
  EXPECT_EQ(c.esd.max_anoms_fraction, 0.02);
  const auto p = c.policy();
  EXPECT_EQ(p.method, FusionMethod::Majority);
  EXPECT_EQ(p.k, 2);
  EXPECT_EQ(p.n_required, 3);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, YamlOverrides) {
  const auto c = apply_yaml(PipelineConfig{}, R"(
seed: 11
bins: {minutes: 30}
holidays: [2017-05-10, "2017-05-11"]
detect: {z_threshold: 2.5, esd_alpha: 0.01, esd_max_anoms: 0.05}
fusion:
  method: weighted
  S: 0.7
  sources: [CDR, BUS, CHECKIN]
  weights: {CDR: 0.8, BUS: 0.1, CHECKIN: 0.1}
eval: {R: "0:2000:500", offset: -1}
granger: {lag: 4, bin_minutes: 15}
annotate: {top_k: 3}
)");
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.occupancy.bin_minutes, 30);
  EXPECT_EQ(c.occupancy.calendar.holidays.size(), 2u);
  EXPECT_EQ(c.z_threshold, 2.5);
  EXPECT_EQ(c.esd.alpha, 0.01);
  EXPECT_EQ(c.fusion_method, FusionMethod::Weighted);
  EXPECT_EQ(c.policy().weights.at(Source::Cdr), 0.8);
  EXPECT_EQ(c.radii, (std::vector<double>{0, 500, 1000, 1500, 2000}));
  EXPECT_EQ(c.offset_hours, -1);
  EXPECT_EQ(c.granger_lag, 4);
  EXPECT_EQ(c.top_k, 3);
}

TEST(Config, EmptyDocumentKeepsDefaults) {
  EXPECT_EQ(apply_yaml(PipelineConfig{}, "").z_threshold, 3.0);
}

TEST(Config, Rejections) {
  EXPECT_THROW(apply_yaml({}, "unknown: 1"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "detect: {zthreshold: 2}"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "detect: {z_threshold: abc}"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "bins: {minutes: 7}"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "fusion: {method: vote}"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "fusion: {sources: [SUBWAY]}"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "detect: {esd_alpha: 1.5}"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "holidays: [2017-02-30]"), ConfigError);
  EXPECT_THROW(apply_yaml({}, "[: bad"), ConfigError);
}

TEST(Config, SourceList) {
  EXPECT_EQ(parse_source_list("CDR,TAXI_DROPOFF"), (std::vector<Source>{Source::Cdr, Source::TaxiDropoff}));
  EXPECT_THROW(parse_source_list("CDR,taxi"), ConfigError);
}

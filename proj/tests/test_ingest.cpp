#include <gtest/gtest.h>

#include <sstream>

#include "urbanpulse/ingest.hpp"

using namespace urbanpulse;

namespace {

Zone box(const std::string& id, double x0, double x1) {
  return make_zone(id, {Polygon{{Ring{{x0, 0}, {x1, 0}, {x1, 1}, {x0, 1}, {x0, 0}}}}});
}

ZoneSet two_zones() { return ZoneSet({box("A", 0, 1), box("B", 1, 2)}); }

template <typename R>
ParseResult<R> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_records<R>(in);
}

const OccupancySeries& series_at(const OccupancyTable& t, Source s, const std::string& loc, int bin, DayType dt) {
  return t.series.at(SeriesKey{s, loc, bin, dt});
}

double value_on(const OccupancySeries& s, Date d) {
  for (const auto& x : s.samples) {
    if (x.date == d) return x.value;
  }
  ADD_FAILURE() << "no sample on " << format_date(d);
  return -1;
}

}  // namespace

TEST(Records, BusRowParses) {
  const auto r = parse<BusArrivalRecord>("bus_stop_id,service_id,timestamp,loading\nS1,svc7,2017-06-30T19:02:00,2\n");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.rejections.empty());
  EXPECT_EQ(r.records[0].bus_stop_id, "S1");
  EXPECT_EQ(r.records[0].service_id, "svc7");
  EXPECT_EQ(r.records[0].loading, 2);
}

TEST(Records, LoadingOutOfRangeRejectedAndParsingContinues) {
  const auto r = parse<BusArrivalRecord>(
      "bus_stop_id,service_id,timestamp,loading\n"
      "S1,svc7,2017-06-30T19:02:00,4\n"
      "S1,svc7,2017-06-30T19:17:00,0\n"
      "S1,svc7,2017-06-30T19:32:00,3\n");
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.rejections.size(), 2u);
  EXPECT_EQ(r.rejections[0].line, 2u);
  EXPECT_EQ(r.records[0].loading, 3);
}

TEST(Records, HeaderOnlyFile) {
  const auto r = parse<TaxiTripRecord>("pickup_lon,pickup_lat,pickup_ts,dropoff_lon,dropoff_lat,dropoff_ts\n");
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.rejections.empty());
}

TEST(Records, MissingOrWrongHeaderIsFatal) {
  EXPECT_THROW(parse<CdrRecord>(""), ParseError);
  EXPECT_THROW(parse<CdrRecord>("zone,timestamp,visitors\n"), ParseError);
}

TEST(Records, RowLevelValidation) {
  const auto cdr = parse<CdrRecord>(
      "zone_id,timestamp,visitors\n"
      "A,2017-06-30T19:00:00,10\n"
      "A,2017-06-30T19:30:00,10\n"   // not hour aligned
      "A,2017-06-30T20:00:00,-1\n"   // negative
      "A,2017-06-30T21:00:00\n");    // short row
  EXPECT_EQ(cdr.records.size(), 1u);
  EXPECT_EQ(cdr.rejections.size(), 3u);
  const auto taxi = parse<TaxiTripRecord>(
      "pickup_lon,pickup_lat,pickup_ts,dropoff_lon,dropoff_lat,dropoff_ts\n"
      "0.5,0.5,2017-06-30T19:00:00,0.5,0.5,2017-06-30T18:00:00\n"
      "0.5,95,2017-06-30T19:00:00,0.5,0.5,2017-06-30T19:10:00\n");
  EXPECT_TRUE(taxi.records.empty());
  EXPECT_EQ(taxi.rejections.size(), 2u);
}

TEST(Records, WriteParseRoundTrip) {
  std::vector<CheckinRecord> in{{"v1", parse_instant("2017-06-30T19:02:00"), {0.25, 0.5}, "Stadium", "u1"},
                                {"v2", parse_instant("2017-06-30T19:05:00"), {1.5, 0.5}, "Bar, Pub", std::nullopt}};
  std::ostringstream out;
  write_records(out, in);
  const auto back = parse<CheckinRecord>(out.str());
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].category, "Bar, Pub");
  EXPECT_FALSE(back.records[1].user_id);
  EXPECT_EQ(back.records[0].location, in[0].location);
}

TEST(Occupancy, TaxiDropoffsCounted) {
  RawDataset data;
  const auto t0 = parse_instant("2017-06-30T18:50:00");
  for (int m : {0, 7, 14}) {
    data.taxi.push_back({{1.5, 0.5}, t0, {0.5, 0.5}, parse_instant("2017-06-30T19:00:00").plus_minutes(m)});
  }
  OccupancyConfig cfg;
  cfg.bin_minutes = 15;
  const auto res = compute_occupancy(data, two_zones(), cfg);
  const Date d = parse_date("2017-06-30");
  EXPECT_EQ(value_on(series_at(res.table, Source::TaxiDropoff, "A", 76, DayType::Weekday), d), 3.0);
  EXPECT_EQ(value_on(series_at(res.table, Source::TaxiDropoff, "A", 77, DayType::Weekday), d), 0.0);
  EXPECT_EQ(value_on(series_at(res.table, Source::TaxiPickup, "B", 75, DayType::Weekday), d), 3.0);
}

TEST(Occupancy, TaxiOutsideZonesCountedInReport) {
  RawDataset data;
  const auto t = parse_instant("2017-06-30T19:00:00");
  data.taxi.push_back({{5, 5}, t, {0.5, 0.5}, t.plus_minutes(5)});
  const auto res = compute_occupancy(data, two_zones(), {});
  EXPECT_EQ(res.report.taxi_pickup_outside, 1u);
  EXPECT_EQ(res.report.taxi_dropoff_outside, 0u);
}

TEST(Occupancy, BusLoadingIsMeanPerStopBin) {
  RawDataset data;
  data.bus.push_back({"S1", "a", parse_instant("2017-06-30T19:01:00"), 1});
  data.bus.push_back({"S1", "b", parse_instant("2017-06-30T19:09:00"), 3});
  const auto res = compute_occupancy(data, two_zones(), {});
  const auto& s = series_at(res.table, Source::Bus, "S1", 76, DayType::Weekday);
  ASSERT_EQ(s.samples.size(), 1u);
  EXPECT_EQ(s.samples[0].value, 2.0);
  EXPECT_FALSE(res.table.series.contains(SeriesKey{Source::Bus, "S1", 77, DayType::Weekday}));
}

TEST(Occupancy, CheckinsCountDistinctUsers) {
  RawDataset data;
  const auto t = parse_instant("2017-06-30T19:00:00");
  for (int i = 0; i < 5; ++i) {
    data.checkins.push_back({"v", t.plus_minutes(i), {0.5, 0.5}, "Stadium", i % 2 ? "u1" : "u2"});
  }
  const auto res = compute_occupancy(data, two_zones(), {});
  EXPECT_EQ(value_on(series_at(res.table, Source::Checkin, "A", 76, DayType::Weekday), parse_date("2017-06-30")), 2.0);
  EXPECT_EQ(res.report.checkin_definition, "unique_users");
}

TEST(Occupancy, DaytypeFromSampleDate) {
  RawDataset data;
  data.cdr.push_back({"A", parse_instant("2017-07-01T10:00:00"), 7});  // Saturday
  data.cdr.push_back({"A", parse_instant("2017-07-03T10:00:00"), 9});  // Monday
  const auto res = compute_occupancy(data, two_zones(), {});
  EXPECT_EQ(value_on(series_at(res.table, Source::Cdr, "A", 10, DayType::Weekend), parse_date("2017-07-01")), 7.0);
  EXPECT_EQ(value_on(series_at(res.table, Source::Cdr, "A", 10, DayType::Weekday), parse_date("2017-07-03")), 9.0);
  // Sunday zero-filled
  EXPECT_EQ(value_on(series_at(res.table, Source::Cdr, "A", 10, DayType::Weekend), parse_date("2017-07-02")), 0.0);
}

TEST(Occupancy, CdrNeedsHourlyBins) {
  RawDataset data;
  data.cdr.push_back({"A", parse_instant("2017-07-03T10:00:00"), 9});
  OccupancyConfig cfg;
  cfg.cdr_bin_minutes = 30;
  EXPECT_THROW(compute_occupancy(data, two_zones(), cfg), ConfigError);
}

TEST(Occupancy, UnknownCdrZoneReported) {
  RawDataset data;
  data.cdr.push_back({"Q", parse_instant("2017-07-03T10:00:00"), 9});
  EXPECT_EQ(compute_occupancy(data, two_zones(), {}).report.cdr_unknown_zone, 1u);
}

TEST(Occupancy, PeriodIgnoresLateDropoffs) {
  RawDataset data;
  data.taxi.push_back({{0.5, 0.5}, parse_instant("2017-07-03T23:50:00"), {0.5, 0.5},
                       parse_instant("2017-07-04T00:10:00")});
  const auto res = compute_occupancy(data, two_zones(), {});
  ASSERT_TRUE(res.table.period);
  EXPECT_EQ(res.table.period->days(), 1);
  EXPECT_EQ(res.report.outside_period, 1u);
}

namespace {

OccupancyTable hourly_day(const std::map<int, double>& values) {
  OccupancyTable t;
  t.schemes[Source::Cdr] = BinScheme::fixed(60);
  const Date d = parse_date("2017-07-03");
  for (int h = 0; h < 24; ++h) {
    SeriesKey k{Source::Cdr, "A", h, DayType::Weekday};
    const auto it = values.find(h);
    t.series[k] = {k, {{d, it == values.end() ? 0.0 : it->second}}};
  }
  return t;
}

std::vector<double> coarse_values(const OccupancyTable& t) {
  std::vector<double> v;
  for (int b = 0; b < 5; ++b) v.push_back(t.series.at(SeriesKey{Source::Cdr, "A", b, DayType::Weekday}).samples[0].value);
  return v;
}

}  // namespace

TEST(CoarseRebin, AllOnesGivesBinLengths) {
  std::map<int, double> ones;
  for (int h = 0; h < 24; ++h) ones[h] = 1.0;
  EXPECT_EQ(coarse_values(coarse_rebin(hourly_day(ones))), (std::vector<double>{7, 4, 7, 3, 3}));
}

TEST(CoarseRebin, ZeroDayAndSingleHour) {
  EXPECT_EQ(coarse_values(coarse_rebin(hourly_day({}))), (std::vector<double>{0, 0, 0, 0, 0}));
  EXPECT_EQ(coarse_values(coarse_rebin(hourly_day({{19, 10.0}}))), (std::vector<double>{0, 0, 0, 10, 0}));
}

TEST(CoarseRebin, RejectsNonHourly) {
  auto t = hourly_day({});
  t.schemes[Source::Cdr] = BinScheme::fixed(15);
  EXPECT_THROW(coarse_rebin(t), ConfigError);
}

TEST(CoarseRebin, BinEdges) {
  const auto c = BinScheme::coarse5();
  EXPECT_EQ(c.bin_of_minute(6 * 60 + 59), 0);
  EXPECT_EQ(c.bin_of_minute(7 * 60), 1);
  EXPECT_EQ(c.bin_of_minute(18 * 60), 3);
  EXPECT_EQ(c.bin_of_minute(23 * 60 + 59), 4);
  EXPECT_EQ(c.label(3), "PM-Peak");
}

TEST(OccupancyIo, RoundTrip) {
  RawDataset data;
  data.cdr.push_back({"A", parse_instant("2017-07-01T10:00:00"), 7});
  data.bus.push_back({"S1", "a", parse_instant("2017-07-01T19:01:00"), 3});
  const auto table = compute_occupancy(data, two_zones(), {}).table;
  std::stringstream occ, bins;
  write_occupancy(occ, table);
  write_bin_schemes(bins, table);
  EXPECT_EQ(read_occupancy(occ, bins), table);
}

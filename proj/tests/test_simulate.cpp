#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "urbanpulse/ingest.hpp"
#include "urbanpulse/pipeline.hpp"
#include "urbanpulse/simulate.hpp"

using namespace urbanpulse;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sim::SimConfig small_config() {
  sim::SimConfig c;
  c.rows = 2;
  c.cols = 2;
  c.days = 7;
  return c;
}

}  // namespace

TEST(Simulate, LongRunMeanMatchesConfig) {
  sim::SimConfig c;
  c.rows = 2;
  c.cols = 3;
  c.days = 60;
  c.weekend_factor = 1.0;
  c.hourly_profile.fill(1.0);
  c.taxi_mean = c.checkin_mean = c.cdr_mean = 5.0;
  const auto out = sim::generate(c);
  std::map<std::string, double> taxi, chk, cdr;
  for (const auto& t : out.taxi) taxi[*out.zones.point_to_zone(t.pickup)] += 1;
  for (const auto& k : out.checkins) chk[*out.zones.point_to_zone(k.location)] += 1;
  for (const auto& r : out.cdr) cdr[r.zone_id] += static_cast<double>(r.visitors);
  ASSERT_EQ(taxi.size(), 6u);
  for (const auto& z : out.zones.zones()) {
    EXPECT_NEAR(taxi[z.zone_id] / (60 * 96), 5.0, 0.3) << z.zone_id;
    EXPECT_NEAR(chk[z.zone_id] / (60 * 96), 5.0, 0.3) << z.zone_id;
    EXPECT_NEAR(cdr[z.zone_id] / (60 * 24), 5.0, 0.3) << z.zone_id;
  }
}

TEST(Simulate, SameSeedByteIdentical) {
  auto c = sim::scenario_concert_large(7);
  c.days = 28;
  const auto a = oracle::scratch_dir("sim_a"), b = oracle::scratch_dir("sim_b");
  const auto files = sim::write_output(sim::generate(c), a, "concert-large");
  sim::write_output(sim::generate(c), b, "concert-large");
  ASSERT_GE(files.size(), 9u);
  for (const auto& f : files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["config_sha256"], sim::sha256_hex(sim::to_json(c).dump()));
  EXPECT_EQ(manifest["config_sha256"].get<std::string>().size(), 64u);
  c.seed = 8;
  const auto other = oracle::scratch_dir("sim_c");
  sim::write_output(sim::generate(c), other, "concert-large");
  EXPECT_NE(slurp(a / "cdr.csv"), slurp(other / "cdr.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(other);
}

TEST(Simulate, Sha256KnownVector) {
  EXPECT_EQ(sim::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Simulate, EventAttendanceConserved) {
  auto quiet = small_config();
  auto with = quiet;
  auto e = sim::make_event("E1", "Show", "show", 1, 1, Date{quiet.start_date.days + 2}, 19, EventScale::Small);
  e.attendance = 400;
  with.events.push_back(e);
  const auto q = sim::generate(quiet), w = sim::generate(with);
  const auto& attr = w.attribution.at("E1");
  long long total = 0;
  for (const auto& [ch, n] : attr) total += n;
  EXPECT_EQ(total, 400);

  long long cdr_q = 0, cdr_w = 0;
  for (const auto& r : q.cdr) cdr_q += r.visitors;
  for (const auto& r : w.cdr) cdr_w += r.visitors;
  EXPECT_EQ(cdr_w - cdr_q, attr.at(sim::Channel::Cdr));
  EXPECT_EQ(static_cast<long long>(w.taxi.size() - q.taxi.size()), attr.at(sim::Channel::Taxi));
  EXPECT_EQ(static_cast<long long>(w.checkins.size() - q.checkins.size()), attr.at(sim::Channel::Checkin));
  EXPECT_EQ(attr.at(sim::Channel::Cdr), 220);  // 0.55 * 400
  EXPECT_EQ(attr.at(sim::Channel::Bus), 60);
}

TEST(Simulate, ArrivalsInsideRampAndNearVenue) {
  auto c = small_config();
  auto e = sim::make_event("E1", "Show", "show", 0, 0, Date{c.start_date.days + 1}, 19, EventScale::Medium);
  e.lead_minutes[sim::Channel::Checkin] = 40;
  c.events.push_back(e);
  const auto out = sim::generate(c);
  const auto start = out.events[0].start;
  int n = 0;
  for (const auto& k : out.checkins) {
    if (k.venue_id != "V_E1") continue;
    ++n;
    EXPECT_GE(k.timestamp, start.plus_minutes(-40));
    EXPECT_LE(k.timestamp, start);
  }
  EXPECT_EQ(n, out.attribution.at("E1").at(sim::Channel::Checkin));
}

TEST(Simulate, ValidationListsFields) {
  auto c = small_config();
  c.days = 0;
  c.taxi_mean = -1;
  auto e = sim::make_event("E9", "x", "x", 9, 0, c.start_date, 19, EventScale::Small);
  e.spatial_decay_m = 0;
  c.events.push_back(e);
  try {
    sim::generate(c);
    FAIL();
  } catch (const ValidationError& err) {
    const std::string m = err.what();
    for (const char* f : {"days", "baseline intensity", "events[E9].zone", "events[E9].spatial_decay_m"}) {
      EXPECT_NE(m.find(f), std::string::npos) << m;
    }
  }
}

TEST(Scenarios, LibraryContents) {
  const auto lib = sim::scenario_library(7);
  for (const char* name : {"baseline-quiet", "concert-large", "multi-scale", "holiday-low", "lead-time-split"}) {
    ASSERT_TRUE(lib.contains(name)) << name;
    EXPECT_NO_THROW(lib.at(name).validate());
  }
  EXPECT_TRUE(lib.at("baseline-quiet").events.empty());
  const auto& concert = lib.at("concert-large").events;
  ASSERT_EQ(concert.size(), 1u);
  EXPECT_EQ(concert[0].scale, EventScale::Large);
  const auto& holiday = lib.at("holiday-low").day_factors;
  ASSERT_EQ(holiday.size(), 1u);
  EXPECT_EQ(holiday.begin()->second, 0.4);
  for (const auto& e : lib.at("lead-time-split").events) {
    EXPECT_EQ(e.lead_minutes.at(sim::Channel::Bus), 60);
    EXPECT_EQ(e.lead_minutes.at(sim::Channel::Taxi), 15);
  }
  std::set<EventScale> scales;
  for (const auto& e : lib.at("multi-scale").events) scales.insert(e.scale);
  EXPECT_EQ(scales.size(), 3u);
}

TEST(Scenarios, HolidayScalesWholeDay) {
  auto c = sim::scenario_holiday_low(7);
  c.events.clear();
  const auto out = sim::generate(c);
  const Date hol = c.day_factors.begin()->first;
  const Date ref = Date{hol.days + 7};  // same weekday, a week later
  double a = 0, b = 0;
  for (const auto& r : out.cdr) {
    if (r.timestamp.date() == hol) a += static_cast<double>(r.visitors);
    if (r.timestamp.date() == ref) b += static_cast<double>(r.visitors);
  }
  EXPECT_NEAR(a / b, 0.4, 0.02);
}

TEST(Scenarios, BusPeakPrecedesTaxiPeak) {
  const auto out = sim::generate(sim::scenario_lead_time_split(7));
  RawDataset raw{out.cdr, out.bus, out.taxi, out.checkins};
  const auto table = compute_occupancy(raw, out.zones, {}).table;
  const std::string zone = sim::Grid::zone_id(2, 3);
  const auto bus = *pipeline::zone_series(table, Source::Bus, 15, out.zones, out.stops).at(zone);
  const auto taxi = *pipeline::zone_series(table, Source::TaxiDropoff, 15, out.zones, out.stops).at(zone);
  std::array<double, 96> bus_day{}, taxi_day{};
  for (std::size_t t = 0; t < bus.size(); ++t) {
    bus_day[t % 96] += bus[t];
    taxi_day[t % 96] += taxi[t];
  }
  const auto peak = [](const std::array<double, 96>& v) {
    return static_cast<int>(std::max_element(v.begin() + 64, v.begin() + 88) - v.begin());
  };
  EXPECT_GE((peak(taxi_day) - peak(bus_day)) * 15, 30) << peak(bus_day) << " " << peak(taxi_day);
}

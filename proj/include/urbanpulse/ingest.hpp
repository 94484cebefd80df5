#pragma once

// Aggregation of raw records into per-(source, location, bin, daytype)
// occupancy series.

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "urbanpulse/bins.hpp"
#include "urbanpulse/civil_time.hpp"
#include "urbanpulse/geo.hpp"
#include "urbanpulse/records.hpp"

namespace urbanpulse {

struct SeriesKey {
  Source source{Source::Cdr};
  std::string location_id;
  int bin_of_day{0};
  DayType daytype{DayType::Weekday};

  friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
  friend bool operator==(const SeriesKey&, const SeriesKey&) = default;
};

struct Sample {
  Date date;
  double value{0.0};

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct OccupancySeries {
  SeriesKey key;
  std::vector<Sample> samples;  // strictly increasing dates, all of key.daytype

  friend bool operator==(const OccupancySeries&, const OccupancySeries&) = default;
};

using SeriesMap = std::map<SeriesKey, OccupancySeries>;

struct DateRange {
  Date first;
  Date last;

  bool contains(Date d) const { return d >= first && d <= last; }
  int days() const { return last.days - first.days + 1; }
  friend bool operator==(const DateRange&, const DateRange&) = default;
};

/// Series plus the binning each source was aggregated with.
struct OccupancyTable {
  std::map<Source, BinScheme> schemes;
  SeriesMap series;
  std::optional<DateRange> period;

  friend bool operator==(const OccupancyTable&, const OccupancyTable&) = default;
};

struct Calendar {
  std::set<Date> holidays;
  int utc_offset_minutes{0};  // documents the locale only
};

struct OccupancyConfig {
  int cdr_bin_minutes{60};
  int bin_minutes{15};  // BUS, taxi and check-in channels
  std::optional<DateRange> period;  // inferred from the records when absent
  Calendar calendar;
};

struct RawDataset {
  std::vector<CdrRecord> cdr;
  std::vector<BusArrivalRecord> bus;
  std::vector<TaxiTripRecord> taxi;
  std::vector<CheckinRecord> checkins;
};

struct IngestReport {
  std::size_t cdr_unknown_zone{0};
  std::size_t taxi_pickup_outside{0};
  std::size_t taxi_dropoff_outside{0};
  std::size_t checkin_outside{0};
  std::size_t outside_period{0};
  std::string checkin_definition{"none"};  // unique_users | record_count | mixed | none
};

struct OccupancyResult {
  OccupancyTable table;
  IngestReport report;
};

namespace detail {

// Dense per-location, per-day, per-bin accumulator for count sources.
class CountGrid {
 public:
  CountGrid(std::vector<std::string> locations, DateRange period, int bins)
      : locations_(std::move(locations)), period_(period), bins_(bins),
        values_(locations_.size() * static_cast<std::size_t>(period.days()) * bins, 0.0) {
    for (std::size_t i = 0; i < locations_.size(); ++i) index_.emplace(locations_[i], i);
  }

  std::optional<std::size_t> location_index(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double& at(std::size_t loc, Date d, int bin) {
    return values_[(loc * static_cast<std::size_t>(period_.days()) + (d.days - period_.first.days)) * bins_ + bin];
  }

  void emit(Source source, SeriesMap& out) {
    for (std::size_t loc = 0; loc < locations_.size(); ++loc) {
      for (int bin = 0; bin < bins_; ++bin) {
        for (int di = 0; di < period_.days(); ++di) {
          const Date d{period_.first.days + di};
          SeriesKey key{source, locations_[loc], bin, daytype_of(d)};
          auto& series = out[key];
          series.key = key;
          series.samples.push_back({d, at(loc, d, bin)});
        }
      }
    }
  }

 private:
  std::vector<std::string> locations_;
  DateRange period_;
  int bins_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline std::optional<DateRange> infer_period(const RawDataset& data) {
  std::optional<Date> lo, hi;
  auto see = [&](Instant t) {
    const Date d = t.date();
    if (!lo || d < *lo) lo = d;
    if (!hi || d > *hi) hi = d;
  };
  for (const auto& r : data.cdr) see(r.timestamp);
  for (const auto& r : data.bus) see(r.timestamp);
  // dropoffs of late trips spill past midnight; they do not extend the period
  for (const auto& r : data.taxi) see(r.pickup_ts);
  for (const auto& r : data.checkins) see(r.timestamp);
  if (!lo) return std::nullopt;
  return DateRange{*lo, *hi};
}

}  // namespace detail

/// Builds occupancy series for every source present in `data`.
///
/// CDR sums visitors per zone-bin, BUS averages loading per stop-bin, taxi
/// channels count pickups/dropoffs falling into each zone, and check-ins count
/// distinct user ids per zone-bin (records without a user id count once each).
/// Count sources are zero-filled over the full period; BUS cells without an
/// arrival stay absent.
inline OccupancyResult compute_occupancy(const RawDataset& data, const ZoneSet& zones,
                                         const OccupancyConfig& config) {
  if (config.cdr_bin_minutes != 60) {
    throw ConfigError("CDR occupancy requires 60-minute bins (hourly source granularity)");
  }
  const BinScheme cdr_scheme = BinScheme::fixed(config.cdr_bin_minutes);
  const BinScheme fine = BinScheme::fixed(config.bin_minutes);
  if ((!data.taxi.empty() || !data.checkins.empty()) && zones.empty()) {
    throw ConfigError("taxi and check-in aggregation needs zones");
  }

  OccupancyResult result;
  auto& table = result.table;
  auto& report = result.report;
  const auto period = config.period ? config.period : detail::infer_period(data);
  table.period = period;
  if (!period) return result;

  std::vector<std::string> zone_ids;
  for (const auto& z : zones.zones()) zone_ids.push_back(z.zone_id);

  if (!data.cdr.empty()) {
    table.schemes[Source::Cdr] = cdr_scheme;
    std::vector<std::string> ids = zone_ids;
    if (zones.empty()) {
      std::set<std::string> seen;
      for (const auto& r : data.cdr) seen.insert(r.zone_id);
      ids.assign(seen.begin(), seen.end());
    }
    detail::CountGrid grid(ids, *period, cdr_scheme.bins_per_day());
    for (const auto& r : data.cdr) {
      const auto loc = grid.location_index(r.zone_id);
      if (!loc) {
        ++report.cdr_unknown_zone;
        continue;
      }
      if (!period->contains(r.timestamp.date())) {
        ++report.outside_period;
        continue;
      }
      grid.at(*loc, r.timestamp.date(), cdr_scheme.bin_of_minute(r.timestamp.minute_of_day())) +=
          static_cast<double>(r.visitors);
    }
    grid.emit(Source::Cdr, table.series);
  }

  if (!data.taxi.empty()) {
    table.schemes[Source::TaxiPickup] = fine;
    table.schemes[Source::TaxiDropoff] = fine;
    detail::CountGrid pick(zone_ids, *period, fine.bins_per_day());
    detail::CountGrid drop(zone_ids, *period, fine.bins_per_day());
    for (const auto& r : data.taxi) {
      const auto add = [&](detail::CountGrid& g, GeoPoint p, Instant t, std::size_t& outside) {
        if (!period->contains(t.date())) {
          ++report.outside_period;
          return;
        }
        const auto z = zones.point_to_zone(p);
        if (!z) {
          ++outside;
          return;
        }
        g.at(*g.location_index(*z), t.date(), fine.bin_of_minute(t.minute_of_day())) += 1.0;
      };
      add(pick, r.pickup, r.pickup_ts, report.taxi_pickup_outside);
      add(drop, r.dropoff, r.dropoff_ts, report.taxi_dropoff_outside);
    }
    pick.emit(Source::TaxiPickup, table.series);
    drop.emit(Source::TaxiDropoff, table.series);
  }

  if (!data.checkins.empty()) {
    table.schemes[Source::Checkin] = fine;
    detail::CountGrid grid(zone_ids, *period, fine.bins_per_day());
    // (zone, day, bin) -> distinct user ids
    std::map<std::tuple<std::size_t, int, int>, std::set<std::string>> users;
    std::size_t with_user = 0, without_user = 0;
    for (const auto& r : data.checkins) {
      const Date d = r.timestamp.date();
      if (!period->contains(d)) {
        ++report.outside_period;
        continue;
      }
      const auto z = zones.point_to_zone(r.location);
      if (!z) {
        ++report.checkin_outside;
        continue;
      }
      const auto loc = *grid.location_index(*z);
      const int bin = fine.bin_of_minute(r.timestamp.minute_of_day());
      if (r.user_id) {
        ++with_user;
        if (users[{loc, d.days, bin}].insert(*r.user_id).second) grid.at(loc, d, bin) += 1.0;
      } else {
        ++without_user;
        grid.at(loc, d, bin) += 1.0;
      }
    }
    report.checkin_definition = without_user == 0 ? "unique_users" : with_user == 0 ? "record_count" : "mixed";
    grid.emit(Source::Checkin, table.series);
  }

  if (!data.bus.empty()) {
    table.schemes[Source::Bus] = fine;
    std::map<std::tuple<std::string, int, int>, std::pair<double, int>> acc;
    for (const auto& r : data.bus) {
      const Date d = r.timestamp.date();
      if (!period->contains(d)) {
        ++report.outside_period;
        continue;
      }
      auto& [sum, n] = acc[{r.bus_stop_id, d.days, fine.bin_of_minute(r.timestamp.minute_of_day())}];
      sum += r.loading;
      ++n;
    }
    for (const auto& [k, v] : acc) {
      const auto& [stop, day, bin] = k;
      const Date d{day};
      SeriesKey key{Source::Bus, stop, bin, daytype_of(d)};
      auto& series = table.series[key];
      series.key = key;
      series.samples.push_back({d, v.first / v.second});
    }
  }
  return result;
}

/// Sums hourly series of every (source, location, daytype) into the five
/// coarse daily bins. Throws ConfigError if a source is not hourly.
inline OccupancyTable coarse_rebin(const OccupancyTable& hourly) {
  OccupancyTable out;
  out.period = hourly.period;
  for (const auto& [src, scheme] : hourly.schemes) {
    if (scheme.coarse || scheme.width_minutes != 60) {
      throw ConfigError("coarse rebinning needs hourly input for " + std::string(to_string(src)));
    }
    out.schemes[src] = BinScheme::coarse5();
  }
  const BinScheme coarse = BinScheme::coarse5();
  std::map<SeriesKey, std::map<int, double>> acc;
  for (const auto& [key, series] : hourly.series) {
    if (!hourly.schemes.contains(key.source)) {
      throw ConfigError("no bin scheme for " + std::string(to_string(key.source)));
    }
    SeriesKey ck = key;
    ck.bin_of_day = coarse.bin_of_minute(key.bin_of_day * 60);
    auto& m = acc[ck];
    for (const auto& s : series.samples) m[s.date.days] += s.value;
  }
  for (auto& [key, m] : acc) {
    auto& series = out.series[key];
    series.key = key;
    for (const auto& [day, v] : m) series.samples.push_back({Date{day}, v});
  }
  return out;
}

// Artifact I/O: occupancy.csv `source,location_id,bin_of_day,daytype,date,value`
// plus bins.csv `source,scheme` and an optional period row.

inline void write_occupancy(std::ostream& out, const OccupancyTable& table) {
  csv::Writer w(out);
  w.row("source", "location_id", "bin_of_day", "daytype", "date", "value");
  for (const auto& [key, series] : table.series) {
    for (const auto& s : series.samples) {
      w.row(to_string(key.source), key.location_id, key.bin_of_day, to_string(key.daytype), format_date(s.date),
            s.value);
    }
  }
}

inline void write_bin_schemes(std::ostream& out, const OccupancyTable& table) {
  csv::Writer w(out);
  w.row("source", "scheme", "first_date", "last_date");
  for (const auto& [src, scheme] : table.schemes) {
    w.row(to_string(src), scheme.to_string(), table.period ? format_date(table.period->first) : "",
          table.period ? format_date(table.period->last) : "");
  }
}

inline OccupancyTable read_occupancy(std::istream& occupancy, std::istream& schemes) {
  OccupancyTable table;
  csv::Reader sr(schemes);
  std::vector<std::string> f;
  if (!sr.next(f)) throw ParseError("bins.csv: missing header");
  csv::require_header(f, {"source", "scheme", "first_date", "last_date"}, "bins.csv");
  while (sr.next(f)) {
    if (f.size() != 4) throw ParseError("bins.csv: bad row at line " + std::to_string(sr.line_number()));
    const auto src = parse_source_name(f[0]);
    if (!src) throw ParseError("bins.csv: unknown source '" + f[0] + "'");
    table.schemes[*src] = BinScheme::parse(f[1]);
    if (!f[2].empty()) table.period = DateRange{parse_date(f[2]), parse_date(f[3])};
  }
  csv::Reader r(occupancy);
  if (!r.next(f)) throw ParseError("occupancy.csv: missing header");
  csv::require_header(f, {"source", "location_id", "bin_of_day", "daytype", "date", "value"}, "occupancy.csv");
  while (r.next(f)) {
    const auto where = " at line " + std::to_string(r.line_number());
    if (f.size() != 6) throw ParseError("occupancy.csv: bad row" + where);
    const auto src = parse_source_name(f[0]);
    const auto bin = csv::parse_int(f[2]);
    const auto dt = parse_daytype(f[3]);
    const auto v = csv::parse_double(f[5]);
    if (!src || !bin || !dt || !v) throw ParseError("occupancy.csv: bad field" + where);
    SeriesKey key{*src, f[1], static_cast<int>(*bin), *dt};
    auto& series = table.series[key];
    series.key = key;
    series.samples.push_back({parse_date(f[4]), *v});
  }
  for (auto& [key, series] : table.series) {
    std::sort(series.samples.begin(), series.samples.end(),
              [](const Sample& a, const Sample& b) { return a.date < b.date; });
  }
  return table;
}

}  // namespace urbanpulse

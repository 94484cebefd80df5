#pragma once

// Raw record schemas for the four mobility feeds, with CSV parsing that
// rejects bad rows individually instead of aborting the file.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "urbanpulse/civil_time.hpp"
#include "urbanpulse/csv.hpp"
#include "urbanpulse/geo.hpp"

namespace urbanpulse {

struct CdrRecord {
  std::string zone_id;
  Instant timestamp;
  long long visitors{0};
};

struct BusArrivalRecord {
  std::string bus_stop_id;
  std::string service_id;
  Instant timestamp;
  int loading{1};
};

struct TaxiTripRecord {
  GeoPoint pickup;
  Instant pickup_ts;
  GeoPoint dropoff;
  Instant dropoff_ts;
};

struct CheckinRecord {
  std::string venue_id;
  Instant timestamp;
  GeoPoint location;
  std::string category;
  std::optional<std::string> user_id;
};

struct MessageRecord {
  Instant timestamp;
  GeoPoint location;
  std::string text;
};

struct Rejection {
  std::size_t line{0};
  std::string reason;
};

template <typename Record>
struct ParseResult {
  std::vector<Record> records;
  std::vector<Rejection> rejections;
};

template <typename Record>
struct RecordSchema;

template <>
struct RecordSchema<CdrRecord> {
  static constexpr const char* label = "cdr.csv";
  static std::vector<std::string> header() { return {"zone_id", "timestamp", "visitors"}; }
  static CdrRecord parse(const std::vector<std::string>& f) {
    CdrRecord r;
    if (f[0].empty()) throw ValidationError("empty zone_id");
    r.zone_id = f[0];
    r.timestamp = parse_instant(f[1]);
    if (r.timestamp.minute_of_day() % 60 != 0) throw ValidationError("timestamp not hour-aligned");
    const auto v = csv::parse_int(f[2]);
    if (!v || *v < 0) throw ValidationError("visitors must be a non-negative integer");
    r.visitors = *v;
    return r;
  }
  static void write(csv::Writer& w, const CdrRecord& r) {
    w.row(r.zone_id, format_instant(r.timestamp), r.visitors);
  }
};

template <>
struct RecordSchema<BusArrivalRecord> {
  static constexpr const char* label = "bus.csv";
  static std::vector<std::string> header() { return {"bus_stop_id", "service_id", "timestamp", "loading"}; }
  static BusArrivalRecord parse(const std::vector<std::string>& f) {
    BusArrivalRecord r;
    if (f[0].empty()) throw ValidationError("empty bus_stop_id");
    r.bus_stop_id = f[0];
    r.service_id = f[1];
    r.timestamp = parse_instant(f[2]);
    const auto v = csv::parse_int(f[3]);
    if (!v || *v < 1 || *v > 3) throw ValidationError("loading must be 1, 2 or 3");
    r.loading = static_cast<int>(*v);
    return r;
  }
  static void write(csv::Writer& w, const BusArrivalRecord& r) {
    w.row(r.bus_stop_id, r.service_id, format_instant(r.timestamp), r.loading);
  }
};

namespace detail {

inline double parse_coord(const std::string& s, const char* what) {
  const auto v = csv::parse_double(s);
  if (!v) throw ValidationError(std::string("bad ") + what);
  return *v;
}

inline GeoPoint parse_point(const std::string& lon, const std::string& lat) {
  GeoPoint p{parse_coord(lon, "longitude"), parse_coord(lat, "latitude")};
  if (!p.valid()) throw ValidationError("coordinate out of range");
  return p;
}

}  // namespace detail

template <>
struct RecordSchema<TaxiTripRecord> {
  static constexpr const char* label = "taxi.csv";
  static std::vector<std::string> header() {
    return {"pickup_lon", "pickup_lat", "pickup_ts", "dropoff_lon", "dropoff_lat", "dropoff_ts"};
  }
  static TaxiTripRecord parse(const std::vector<std::string>& f) {
    TaxiTripRecord r;
    r.pickup = detail::parse_point(f[0], f[1]);
    r.pickup_ts = parse_instant(f[2]);
    r.dropoff = detail::parse_point(f[3], f[4]);
    r.dropoff_ts = parse_instant(f[5]);
    if (r.dropoff_ts < r.pickup_ts) throw ValidationError("dropoff before pickup");
    return r;
  }
  static void write(csv::Writer& w, const TaxiTripRecord& r) {
    w.row(r.pickup.lon, r.pickup.lat, format_instant(r.pickup_ts), r.dropoff.lon, r.dropoff.lat,
          format_instant(r.dropoff_ts));
  }
};

template <>
struct RecordSchema<CheckinRecord> {
  static constexpr const char* label = "checkins.csv";
  static std::vector<std::string> header() {
    return {"venue_id", "timestamp", "lat", "lon", "category", "user_id"};
  }
  static CheckinRecord parse(const std::vector<std::string>& f) {
    CheckinRecord r;
    r.venue_id = f[0];
    r.timestamp = parse_instant(f[1]);
    r.location = detail::parse_point(f[3], f[2]);
    if (f[4].empty()) throw ValidationError("empty category");
    r.category = f[4];
    if (!f[5].empty()) r.user_id = f[5];
    return r;
  }
  static void write(csv::Writer& w, const CheckinRecord& r) {
    w.row(r.venue_id, format_instant(r.timestamp), r.location.lat, r.location.lon, r.category,
          r.user_id.value_or(""));
  }
};

template <>
struct RecordSchema<MessageRecord> {
  static constexpr const char* label = "messages.csv";
  static std::vector<std::string> header() { return {"timestamp", "lat", "lon", "text"}; }
  static MessageRecord parse(const std::vector<std::string>& f) {
    MessageRecord r;
    r.timestamp = parse_instant(f[0]);
    r.location = detail::parse_point(f[2], f[1]);
    r.text = f[3];
    return r;
  }
  static void write(csv::Writer& w, const MessageRecord& r) {
    w.row(format_instant(r.timestamp), r.location.lat, r.location.lon, r.text);
  }
};

/// Parses a CSV stream. A missing or wrong header is fatal (ParseError); each
/// bad row is rejected with its line number and parsing continues.
template <typename Record>
ParseResult<Record> parse_records(std::istream& in) {
  using Schema = RecordSchema<Record>;
  csv::Reader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ParseError(std::string(Schema::label) + ": missing header row");
  const auto header = Schema::header();
  csv::require_header(fields, header, Schema::label);
  ParseResult<Record> out;
  while (reader.next(fields)) {
    if (fields.size() != header.size()) {
      out.rejections.push_back({reader.line_number(), "expected " + std::to_string(header.size()) +
                                                          " fields, got " + std::to_string(fields.size())});
      continue;
    }
    try {
      out.records.push_back(Schema::parse(fields));
    } catch (const std::exception& e) {
      out.rejections.push_back({reader.line_number(), e.what()});
    }
  }
  return out;
}

template <typename Record>
void write_records(std::ostream& out, const std::vector<Record>& records) {
  using Schema = RecordSchema<Record>;
  csv::Writer w(out);
  w.row(Schema::header());
  for (const auto& r : records) Schema::write(w, r);
}

/// Optional stops.csv: `bus_stop_id,lat,lon`.
using StopLocations = std::map<std::string, GeoPoint>;

inline StopLocations parse_stops(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw ParseError("stops.csv: missing header row");
  csv::require_header(fields, {"bus_stop_id", "lat", "lon"}, "stops.csv");
  StopLocations stops;
  while (reader.next(fields)) {
    const auto where = " (line " + std::to_string(reader.line_number()) + ")";
    if (fields.size() != 3) throw ParseError("stops.csv: bad row" + where);
    GeoPoint p;
    try {
      p = detail::parse_point(fields[2], fields[1]);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("stops.csv: ") + e.what() + where);
    }
    if (!stops.emplace(fields[0], p).second) throw ValidationError("stops.csv: duplicate stop" + where);
  }
  return stops;
}

inline void write_stops(std::ostream& out, const StopLocations& stops) {
  csv::Writer w(out);
  w.row("bus_stop_id", "lat", "lon");
  for (const auto& [id, p] : stops) w.row(id, p.lat, p.lon);
}

}  // namespace urbanpulse

#pragma once

// Recall of ground-truth events as a function of localization radius R and
// temporal offset.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "urbanpulse/detect.hpp"
#include "urbanpulse/fuse.hpp"
#include "urbanpulse/geo.hpp"
#include "urbanpulse/ingest.hpp"

namespace urbanpulse {

enum class EventScale { Small, Medium, Large };

inline std::string_view to_string(EventScale s) {
  switch (s) {
    case EventScale::Small: return "SMALL";
    case EventScale::Medium: return "MEDIUM";
    case EventScale::Large: return "LARGE";
  }
  return "?";
}

inline std::optional<EventScale> parse_scale(std::string_view s) {
  if (s == "SMALL") return EventScale::Small;
  if (s == "MEDIUM") return EventScale::Medium;
  if (s == "LARGE") return EventScale::Large;
  return std::nullopt;
}

struct GroundTruthEvent {
  std::string event_id;
  std::string name;
  GeoPoint venue;
  Instant start;
  Instant end;
  EventScale scale{EventScale::Medium};
};

/// events.csv: `event_id,name,lat,lon,start_ts,end_ts,scale`.
inline std::vector<GroundTruthEvent> read_events(std::istream& in) {
  csv::Reader r(in);
  std::vector<std::string> f;
  if (!r.next(f)) throw ParseError("events.csv: missing header");
  csv::require_header(f, {"event_id", "name", "lat", "lon", "start_ts", "end_ts", "scale"}, "events.csv");
  std::vector<GroundTruthEvent> out;
  while (r.next(f)) {
    const auto where = " at line " + std::to_string(r.line_number());
    if (f.size() != 7) throw ParseError("events.csv: bad row" + where);
    GroundTruthEvent e;
    e.event_id = f[0];
    e.name = f[1];
    const auto lat = csv::parse_double(f[2]);
    const auto lon = csv::parse_double(f[3]);
    if (!lat || !lon) throw ParseError("events.csv: bad coordinate" + where);
    e.venue = GeoPoint{*lon, *lat};
    if (!e.venue.valid()) throw ValidationError("events.csv: coordinate out of range" + where);
    e.start = parse_instant(f[4]);
    e.end = parse_instant(f[5]);
    if (e.end < e.start) throw ValidationError("events.csv: end before start" + where);
    const auto sc = parse_scale(f[6]);
    if (!sc) throw ParseError("events.csv: bad scale" + where);
    e.scale = *sc;
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_events(std::ostream& out, const std::vector<GroundTruthEvent>& events) {
  csv::Writer w(out);
  w.row("event_id", "name", "lat", "lon", "start_ts", "end_ts", "scale");
  for (const auto& e : events) {
    w.row(e.event_id, e.name, e.venue.lat, e.venue.lon, format_instant(e.start), format_instant(e.end),
          to_string(e.scale));
  }
}

/// An anomalous (zone, date, time window) with the zone's representative
/// point, the common currency for source and fused decisions.
struct LocatedAnomaly {
  std::string zone_id;
  GeoPoint point;
  Date date;
  int start_minute{0};  // [start, end) minutes of day
  int end_minute{0};
};

inline std::vector<LocatedAnomaly> locate(const std::vector<AnomalyDecision>& decisions,
                                          const std::map<Source, BinScheme>& schemes, const ZoneSet& zones,
                                          const StopLocations& stops) {
  const auto stop_zone = stop_zones(stops, zones);
  std::vector<LocatedAnomaly> out;
  for (const auto& d : decisions) {
    if (!d.is_anomaly) continue;
    const auto zone = location_zone(d.key.source, d.key.location_id, stop_zone, zones);
    if (!zone) continue;
    const Zone* z = zones.find(*zone);
    if (!z) continue;
    const auto it = schemes.find(d.key.source);
    if (it == schemes.end()) throw ConfigError("no bin scheme for " + std::string(to_string(d.key.source)));
    const auto [s, e] = it->second.interval(d.key.bin_of_day);
    out.push_back({*zone, z->centroid, d.date, s, e});
  }
  return out;
}

inline std::vector<LocatedAnomaly> locate(const std::vector<FusedDecision>& decisions, const BinScheme& scheme,
                                          const ZoneSet& zones) {
  std::vector<LocatedAnomaly> out;
  for (const auto& d : decisions) {
    if (!d.is_anomaly) continue;
    const Zone* z = zones.find(d.cell.zone_id);
    if (!z) continue;
    const auto [s, e] = scheme.interval(d.cell.bin_of_day);
    out.push_back({d.cell.zone_id, z->centroid, d.cell.date, s, e});
  }
  return out;
}

/// The clock hour that is matched against: the hour containing the event
/// start, shifted by `offset_hours`.
struct TargetWindow {
  Date date;
  int start_minute{0};
  int end_minute{0};
};

inline TargetWindow target_window(const GroundTruthEvent& e, int offset_hours) {
  const std::int64_t hour_start = (e.start.minutes / 60) * 60 + static_cast<std::int64_t>(offset_hours) * 60;
  const Instant t{hour_start};
  return {t.date(), t.minute_of_day(), t.minute_of_day() + 60};
}

inline bool window_matches(const LocatedAnomaly& a, const TargetWindow& w) {
  return a.date == w.date && a.start_minute < w.end_minute && w.start_minute < a.end_minute;
}

/// True iff some anomaly overlapping the target hour lies within R meters
/// (inclusive) of the venue.
inline bool event_recalled(const GroundTruthEvent& event, const std::vector<LocatedAnomaly>& anomalies, double radius_m,
                           int offset_hours) {
  const auto w = target_window(event, offset_hours);
  return std::any_of(anomalies.begin(), anomalies.end(), [&](const LocatedAnomaly& a) {
    return window_matches(a, w) && haversine_m(a.point, event.venue) <= radius_m;
  });
}

struct RecallPoint {
  double radius_m{0.0};
  double recall{0.0};
};

struct RecallCurve {
  std::string label;
  int offset_hours{0};
  std::vector<RecallPoint> points;
  std::size_t eligible{0};
  std::vector<std::string> excluded_events;  // start date outside the data period
};

/// 0..4000 m in 250 m steps.
inline std::vector<double> default_radius_grid() {
  std::vector<double> r;
  for (int m = 0; m <= 4000; m += 250) r.push_back(m);
  return r;
}

/// Parses `lo:hi:step` (inclusive) or a single value.
inline std::vector<double> parse_radius_grid(std::string_view spec) {
  std::vector<double> parts;
  std::size_t pos = 0;
  while (true) {
    const auto colon = spec.find(':', pos);
    const auto tok = spec.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos);
    const auto v = csv::parse_double(tok);
    if (!v) throw ConfigError("bad radius grid '" + std::string(spec) + "'");
    parts.push_back(*v);
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || parts[2] <= 0.0 || parts[1] < parts[0]) {
    throw ConfigError("radius grid must be lo:hi:step with step > 0");
  }
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long i = 0; i <= count; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return out;
}

/// Distance from the venue to the nearest matching anomaly, or +inf.
inline double nearest_match_m(const GroundTruthEvent& event, const std::vector<LocatedAnomaly>& anomalies,
                              int offset_hours) {
  const auto w = target_window(event, offset_hours);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : anomalies) {
    if (window_matches(a, w)) best = std::min(best, haversine_m(a.point, event.venue));
  }
  return best;
}

inline RecallCurve recall_curve(const std::vector<GroundTruthEvent>& events, const std::vector<LocatedAnomaly>& anomalies,
                                const DateRange& period, std::vector<double> radii, int offset_hours,
                                std::string label = {}) {
  std::sort(radii.begin(), radii.end());
  RecallCurve curve;
  curve.label = std::move(label);
  curve.offset_hours = offset_hours;
  std::vector<double> nearest;
  for (const auto& e : events) {
    if (!period.contains(e.start.date())) {
      curve.excluded_events.push_back(e.event_id);
      continue;
    }
    nearest.push_back(nearest_match_m(e, anomalies, offset_hours));
  }
  curve.eligible = nearest.size();
  if (curve.eligible == 0) throw DomainError("no eligible events inside the data period");
  for (double r : radii) {
    const auto hit = std::count_if(nearest.begin(), nearest.end(), [r](double d) { return d <= r; });
    curve.points.push_back({r, static_cast<double>(hit) / static_cast<double>(curve.eligible)});
  }
  return curve;
}

/// Curve CSV: `label,offset_hours,R_m,recall`.
inline void write_curves(std::ostream& out, const std::vector<RecallCurve>& curves) {
  csv::Writer w(out);
  w.row("label", "offset_hours", "R_m", "recall");
  for (const auto& c : curves) {
    for (const auto& p : c.points) w.row(c.label, c.offset_hours, p.radius_m, p.recall);
  }
}

struct SweepCell {
  std::string method;
  double radius_m{0.0};
  double score_threshold{0.0};
  double recall{0.0};
};

/// A labelled fusion policy or single-source readout for the sweep; S is
/// substituted per grid column.
struct SweepEntry {
  std::string label;
  FusionPolicy policy;
};

/// Recall for every (entry, R, S). Single-source entries are WEIGHTED
/// policies with weight 1 on one source over a one-source aligned table.
inline std::vector<SweepCell> sweep(const std::vector<GroundTruthEvent>& events, const AlignedTable& table,
                                    const ZoneSet& zones, const DateRange& period, const std::vector<double>& radii,
                                    const std::vector<double>& thresholds, const std::vector<SweepEntry>& entries,
                                    int offset_hours) {
  std::vector<SweepCell> out;
  for (const auto& entry : entries) {
    for (double s : thresholds) {
      FusionPolicy p = entry.policy;
      p.score_threshold = s;
      AlignedTable view = table;
      if (p.method == FusionMethod::Weighted) {
        // restrict to the sources the entry weighs so N and renormalization match
        view.sources.clear();
        for (const auto& [src, w] : p.weights) view.sources.push_back(src);
      }
      const auto fused = fuse(view, p);
      const auto located = locate(fused, table.scheme, zones);
      const auto curve = recall_curve(events, located, period, radii, offset_hours, entry.label);
      for (const auto& pt : curve.points) out.push_back({entry.label, pt.radius_m, s, pt.recall});
    }
  }
  return out;
}

/// Sweep CSV: `method,R_m,S,recall`.
inline void write_sweep(std::ostream& out, const std::vector<SweepCell>& cells) {
  csv::Writer w(out);
  w.row("method", "R_m", "S", "recall");
  for (const auto& c : cells) w.row(c.method, c.radius_m, c.score_threshold, c.recall);
}

}  // namespace urbanpulse

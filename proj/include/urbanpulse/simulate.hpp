#pragma once

// Seeded synthetic city: square-grid zones, Poisson baseline activity with a
// diurnal profile, and planted events whose attendees arrive through the
// four mobility channels ahead of the event start.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "urbanpulse/evaluate.hpp"
#include "urbanpulse/geo.hpp"
#include "urbanpulse/records.hpp"

namespace urbanpulse::sim {

/// The channels an attendee can arrive through. Taxi arrivals are dropoffs.
enum class Channel { Cdr, Bus, Taxi, Checkin };
inline constexpr std::array<Channel, 4> kChannels{Channel::Cdr, Channel::Bus, Channel::Taxi, Channel::Checkin};

inline std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::Cdr: return "CDR";
    case Channel::Bus: return "BUS";
    case Channel::Taxi: return "TAXI";
    case Channel::Checkin: return "CHECKIN";
  }
  return "?";
}

struct EventSpec {
  std::string event_id;
  std::string name;
  int zone_row{0};
  int zone_col{0};
  double venue_dx{0.5};  // venue position inside the zone, fractions of the edge
  double venue_dy{0.5};
  Date date;
  int start_hour{19};
  int duration_minutes{180};
  int attendance{0};
  EventScale scale{EventScale::Medium};
  std::map<Channel, int> lead_minutes{{Channel::Cdr, 60}, {Channel::Bus, 60}, {Channel::Taxi, 45}, {Channel::Checkin, 45}};
  double spatial_decay_m{250.0};
  std::string hashtag;
  std::string category{"Stadium"};
};

struct SimConfig {
  std::uint64_t seed{7};
  int rows{6};
  int cols{6};
  double edge_m{1000.0};
  GeoPoint origin{103.80, 1.28};  // south-west corner
  Date start_date{make_date(2017, 5, 1)};
  int days{42};
  double weekend_factor{0.85};
  std::map<Date, double> day_factors;  // e.g. holidays

  // Peak means per zone and bin; scaled by the hourly profile.
  double cdr_mean{300.0};      // visitors per zone-hour
  double taxi_mean{5.0};       // pickups per zone per 15 min
  double checkin_mean{6.0};    // check-ins per zone per 15 min
  double bus_riders_mean{15.0};  // riders per bus arrival
  double message_mean{3.0};    // messages per zone-hour
  std::array<double, 24> hourly_profile{0.35, 0.35, 0.35, 0.35, 0.35, 0.4, 0.55, 0.85, 1.0, 0.95, 0.8, 0.75,
                                        0.8,  0.75, 0.75, 0.75, 0.8,  0.9, 1.0,  1.0,  0.95, 0.8, 0.6, 0.45};
  double dispersion{0.0};  // gamma-Poisson overdispersion; 0 = pure Poisson

  int stops_per_zone{1};
  int services_per_stop{2};
  int headway_minutes{15};

  std::map<Channel, double> channel_shares{
      {Channel::Cdr, 0.55}, {Channel::Bus, 0.15}, {Channel::Taxi, 0.15}, {Channel::Checkin, 0.15}};
  double event_message_rate{0.05};  // event messages per attendee

  std::vector<EventSpec> events;

  /// Throws ValidationError listing every offending field.
  void validate() const {
    std::vector<std::string> bad;
    if (rows < 1 || cols < 1) bad.push_back("grid");
    if (!(edge_m > 0.0)) bad.push_back("edge_m");
    if (!origin.valid()) bad.push_back("origin");
    if (days < 1) bad.push_back("days");
    if (!(weekend_factor >= 0.0)) bad.push_back("weekend_factor");
    for (const auto& [d, f] : day_factors) {
      if (!(f >= 0.0)) bad.push_back("day_factors");
    }
    for (double v : {cdr_mean, taxi_mean, checkin_mean, bus_riders_mean, message_mean}) {
      if (!(v >= 0.0)) {
        bad.push_back("baseline intensity");
        break;
      }
    }
    if (std::any_of(hourly_profile.begin(), hourly_profile.end(), [](double v) { return !(v >= 0.0); })) {
      bad.push_back("hourly_profile");
    }
    if (!(dispersion >= 0.0)) bad.push_back("dispersion");
    if (stops_per_zone < 0 || services_per_stop < 1) bad.push_back("bus network");
    if (headway_minutes < 1 || 1440 % headway_minutes != 0) bad.push_back("headway_minutes");
    double share = 0.0;
    for (const auto& [c, s] : channel_shares) {
      if (!(s >= 0.0)) bad.push_back("channel_shares");
      share += s;
    }
    if (std::abs(share - 1.0) > 1e-9) bad.push_back("channel_shares (must sum to 1)");
    if (!(event_message_rate >= 0.0)) bad.push_back("event_message_rate");
    for (const auto& e : events) {
      const std::string p = "events[" + e.event_id + "].";
      if (e.zone_row < 0 || e.zone_row >= rows || e.zone_col < 0 || e.zone_col >= cols) bad.push_back(p + "zone");
      if (e.attendance < 0) bad.push_back(p + "attendance");
      if (!(e.spatial_decay_m > 0.0)) bad.push_back(p + "spatial_decay_m");
      if (e.start_hour < 0 || e.start_hour > 23) bad.push_back(p + "start_hour");
      if (e.duration_minutes < 0) bad.push_back(p + "duration_minutes");
      if (e.venue_dx < 0 || e.venue_dx > 1 || e.venue_dy < 0 || e.venue_dy > 1) bad.push_back(p + "venue offset");
      for (const auto& [c, lead] : e.lead_minutes) {
        if (lead < 0) bad.push_back(p + "lead_minutes");
      }
      if (e.date < start_date || e.date.days >= start_date.days + days) bad.push_back(p + "date");
    }
    if (!bad.empty()) {
      std::string msg = "invalid simulation config:";
      for (const auto& b : bad) msg += " " + b;
      throw ValidationError(msg);
    }
  }
};

inline nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["grid"] = {{"rows", c.rows}, {"cols", c.cols}, {"edge_m", c.edge_m}, {"origin", {c.origin.lon, c.origin.lat}}};
  j["start_date"] = format_date(c.start_date);
  j["days"] = c.days;
  j["weekend_factor"] = c.weekend_factor;
  nlohmann::json df = nlohmann::json::object();
  for (const auto& [d, f] : c.day_factors) df[format_date(d)] = f;
  j["day_factors"] = df;
  j["baseline"] = {{"cdr_mean", c.cdr_mean},
                   {"taxi_mean", c.taxi_mean},
                   {"checkin_mean", c.checkin_mean},
                   {"bus_riders_mean", c.bus_riders_mean},
                   {"message_mean", c.message_mean},
                   {"hourly_profile", c.hourly_profile}};
  j["dispersion"] = c.dispersion;
  j["bus"] = {{"stops_per_zone", c.stops_per_zone},
              {"services_per_stop", c.services_per_stop},
              {"headway_minutes", c.headway_minutes}};
  nlohmann::json shares = nlohmann::json::object();
  for (const auto& [ch, s] : c.channel_shares) shares[std::string(to_string(ch))] = s;
  j["channel_shares"] = shares;
  j["event_message_rate"] = c.event_message_rate;
  j["events"] = nlohmann::json::array();
  for (const auto& e : c.events) {
    nlohmann::json leads = nlohmann::json::object();
    for (const auto& [ch, l] : e.lead_minutes) leads[std::string(to_string(ch))] = l;
    j["events"].push_back({{"event_id", e.event_id},
                           {"name", e.name},
                           {"zone", {e.zone_row, e.zone_col}},
                           {"venue_offset", {e.venue_dx, e.venue_dy}},
                           {"date", format_date(e.date)},
                           {"start_hour", e.start_hour},
                           {"duration_minutes", e.duration_minutes},
                           {"attendance", e.attendance},
                           {"scale", to_string(e.scale)},
                           {"lead_minutes", leads},
                           {"spatial_decay_m", e.spatial_decay_m},
                           {"hashtag", e.hashtag},
                           {"category", e.category}});
  }
  return j;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

struct SimOutput {
  ZoneSet zones;
  nlohmann::json zones_geojson;
  StopLocations stops;
  std::vector<CdrRecord> cdr;
  std::vector<BusArrivalRecord> bus;
  std::vector<TaxiTripRecord> taxi;
  std::vector<CheckinRecord> checkins;
  std::vector<MessageRecord> messages;
  std::vector<GroundTruthEvent> events;
  /// event_id -> channel -> attendees routed through that channel
  std::map<std::string, std::map<Channel, long long>> attribution;
  std::string config_sha256;
  std::uint64_t seed{0};
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Independent stream per (seed, tag, a, b) so generation order never
/// changes the draws.
inline std::mt19937_64 stream(std::uint64_t seed, std::string_view tag, std::int64_t a = 0, std::int64_t b = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a(tag));
  h = splitmix64(h ^ static_cast<std::uint64_t>(a));
  h = splitmix64(h ^ static_cast<std::uint64_t>(b));
  return std::mt19937_64(h);
}

inline double uniform(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline long long poisson(std::mt19937_64& rng, double mean, double dispersion) {
  if (mean <= 0.0) return 0;
  if (dispersion > 0.0) {
    std::gamma_distribution<double> g(1.0 / dispersion, dispersion);
    mean *= g(rng);
    if (mean <= 0.0) return 0;
  }
  return std::poisson_distribution<long long>(mean)(rng);
}

/// Largest-remainder split of `total` by `shares` (ties by channel order).
inline std::map<Channel, long long> apportion(long long total, const std::map<Channel, double>& shares) {
  std::map<Channel, long long> out;
  std::vector<std::pair<double, Channel>> rem;
  long long used = 0;
  for (auto c : kChannels) {
    const auto it = shares.find(c);
    const double exact = static_cast<double>(total) * (it == shares.end() ? 0.0 : it->second);
    const auto base = static_cast<long long>(std::floor(exact));
    out[c] = base;
    used += base;
    rem.emplace_back(exact - static_cast<double>(base), c);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++out[rem[i % rem.size()].second];
  return out;
}

}  // namespace detail

/// Geometry helper for the square grid.
class Grid {
 public:
  explicit Grid(const SimConfig& c) : c_(c) {
    m_per_deg_lat_ = kEarthRadiusM * std::numbers::pi / 180.0;
    m_per_deg_lon_ = m_per_deg_lat_ * std::cos(c.origin.lat * std::numbers::pi / 180.0);
  }

  GeoPoint point(double x_m, double y_m) const {
    return GeoPoint{c_.origin.lon + x_m / m_per_deg_lon_, c_.origin.lat + y_m / m_per_deg_lat_};
  }
  double width_m() const { return c_.cols * c_.edge_m; }
  double height_m() const { return c_.rows * c_.edge_m; }

  static std::string zone_id(int row, int col) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "Z%02d%02d", row, col);
    return buf;
  }

  /// Row/col of a point given in meters (clamped into the city).
  std::pair<int, int> cell_of(double x_m, double y_m) const {
    const int col = std::clamp(static_cast<int>(std::floor(x_m / c_.edge_m)), 0, c_.cols - 1);
    const int row = std::clamp(static_cast<int>(std::floor(y_m / c_.edge_m)), 0, c_.rows - 1);
    return {row, col};
  }

  // Keeps generated points off the exact zone edges so containment is
  // unambiguous after the decimal round trip.
  std::pair<double, double> clamp_inside(double x_m, double y_m) const {
    x_m = std::clamp(x_m, 0.01, width_m() - 0.01);
    y_m = std::clamp(y_m, 0.01, height_m() - 0.01);
    const auto nudge = [&](double v) {
      const double frac = v / c_.edge_m - std::floor(v / c_.edge_m);
      if (frac < 1e-5) return v + 0.01;
      if (frac > 1.0 - 1e-5) return v - 0.01;
      return v;
    };
    return {nudge(x_m), nudge(y_m)};
  }

  std::vector<Zone> zones() const {
    std::vector<Zone> out;
    for (int r = 0; r < c_.rows; ++r) {
      for (int col = 0; col < c_.cols; ++col) {
        const double x0 = col * c_.edge_m, y0 = r * c_.edge_m, x1 = x0 + c_.edge_m, y1 = y0 + c_.edge_m;
        Ring ring{point(x0, y0), point(x1, y0), point(x1, y1), point(x0, y1), point(x0, y0)};
        out.push_back(make_zone(zone_id(r, col), {Polygon{{ring}}}));
      }
    }
    return out;
  }

 private:
  const SimConfig& c_;
  double m_per_deg_lat_{0};
  double m_per_deg_lon_{0};
};

namespace detail {

inline const std::array<std::string_view, 6> kBaselineCategories{"Food", "Office", "Coffee Shop", "Mall", "Gym",
                                                                 "Train Station"};
inline const std::array<std::string_view, 8> kBaselineTags{"#food", "#traffic", "#work", "#coffee",
                                                           "#weekend", "#rain", "#shopping", "#city"};

struct Arrival {
  double x_m{0};
  double y_m{0};
  Instant t;
};

}  // namespace detail

/// Generates every raw feed plus ground truth. Same config and seed give
/// identical output.
inline SimOutput generate(const SimConfig& config) {
  config.validate();
  SimOutput out;
  out.seed = config.seed;
  out.config_sha256 = sha256_hex(to_json(config).dump());
  const Grid grid(config);
  out.zones = ZoneSet(grid.zones());
  out.zones_geojson = zones_to_geojson(out.zones);
  const double dispersion = config.dispersion;

  // Bus network: stops at fixed random spots inside each zone.
  struct Stop {
    std::string id;
    double x_m, y_m;
    int row, col;
    std::vector<int> phase;  // per service, minutes
  };
  std::vector<Stop> stops;
  std::map<std::pair<int, int>, std::vector<std::size_t>> stops_in_cell;
  for (int r = 0; r < config.rows; ++r) {
    for (int c = 0; c < config.cols; ++c) {
      auto rng = detail::stream(config.seed, "stops", r, c);
      for (int s = 0; s < config.stops_per_zone; ++s) {
        Stop st;
        st.id = "S" + Grid::zone_id(r, c).substr(1) + "_" + std::to_string(s);
        const auto [x, y] = grid.clamp_inside((c + 0.15 + 0.7 * detail::uniform(rng)) * config.edge_m,
                                              (r + 0.15 + 0.7 * detail::uniform(rng)) * config.edge_m);
        st.x_m = x;
        st.y_m = y;
        st.row = r;
        st.col = c;
        for (int v = 0; v < config.services_per_stop; ++v) {
          st.phase.push_back(static_cast<int>(detail::uniform(rng) * config.headway_minutes));
        }
        stops_in_cell[{r, c}].push_back(stops.size());
        out.stops.emplace(st.id, grid.point(st.x_m, st.y_m));
        stops.push_back(std::move(st));
      }
    }
  }

  auto day_factor = [&](Date d) {
    double f = daytype_of(d) == DayType::Weekend ? config.weekend_factor : 1.0;
    if (const auto it = config.day_factors.find(d); it != config.day_factors.end()) f *= it->second;
    return f;
  };

  // Event arrivals per channel, drawn first so baseline loops can add them.
  std::map<std::tuple<int, int, std::int64_t>, long long> cdr_extra;  // (row, col, hour index)
  std::map<std::size_t, std::vector<Instant>> bus_extra;              // stop -> rider arrival times
  for (const auto& e : config.events) {
    auto& attr = out.attribution[e.event_id];
    const auto split = detail::apportion(e.attendance, config.channel_shares);
    const double venue_x = (e.zone_col + e.venue_dx) * config.edge_m;
    const double venue_y = (e.zone_row + e.venue_dy) * config.edge_m;
    const auto [vx, vy] = grid.clamp_inside(venue_x, venue_y);
    const Instant start = make_instant(e.date, e.start_hour, 0);
    GroundTruthEvent gt{e.event_id, e.name, grid.point(vx, vy), start, start.plus_minutes(e.duration_minutes), e.scale};
    out.events.push_back(gt);

    for (auto ch : kChannels) {
      auto rng = detail::stream(config.seed, std::string("event-") + std::string(to_string(ch)),
                                static_cast<std::int64_t>(detail::fnv1a(e.event_id)));
      const auto lead_it = e.lead_minutes.find(ch);
      const int lead = lead_it == e.lead_minutes.end() ? 0 : lead_it->second;
      const long long count = split.at(ch);
      attr[ch] = count;
      for (long long i = 0; i < count; ++i) {
        // Linear ramp over [start - lead, start], densest at start - lead.
        const double back = lead * std::sqrt(detail::uniform(rng));
        const Instant t{start.minutes - static_cast<std::int64_t>(std::ceil(back))};
        const double dist = -e.spatial_decay_m * std::log(1.0 - detail::uniform(rng));
        const double ang = 2.0 * std::numbers::pi * detail::uniform(rng);
        const auto [x, y] = grid.clamp_inside(vx + dist * std::cos(ang), vy + dist * std::sin(ang));
        const auto [row, col] = grid.cell_of(x, y);
        switch (ch) {
          case Channel::Cdr:
            ++cdr_extra[{row, col, t.minutes / 60}];
            break;
          case Channel::Bus: {
            const auto& cell_stops = stops_in_cell[{row, col}];
            if (cell_stops.empty()) break;
            std::size_t best = cell_stops.front();
            double best_d = 1e300;
            for (auto si : cell_stops) {
              const double d = std::hypot(stops[si].x_m - x, stops[si].y_m - y);
              if (d < best_d) {
                best_d = d;
                best = si;
              }
            }
            bus_extra[best].push_back(t);
            break;
          }
          case Channel::Taxi: {
            const auto [px, py] = grid.clamp_inside(detail::uniform(rng) * grid.width_m(),
                                                    detail::uniform(rng) * grid.height_m());
            const int ride = 8 + static_cast<int>(detail::uniform(rng) * 22);
            out.taxi.push_back({grid.point(px, py), t.plus_minutes(-ride), grid.point(x, y), t});
            break;
          }
          case Channel::Checkin:
            out.checkins.push_back({"V_" + e.event_id, t, grid.point(x, y), e.category,
                                    "u" + e.event_id + "_" + std::to_string(i)});
            break;
        }
      }
    }
    auto rng = detail::stream(config.seed, "event-messages", static_cast<std::int64_t>(detail::fnv1a(e.event_id)));
    const auto n_msgs = static_cast<long long>(std::llround(e.attendance * config.event_message_rate));
    const int lead = std::max(e.lead_minutes.count(Channel::Checkin) ? e.lead_minutes.at(Channel::Checkin) : 0, 30);
    for (long long i = 0; i < n_msgs; ++i) {
      const Instant t{start.minutes - static_cast<std::int64_t>(std::ceil(lead * std::sqrt(detail::uniform(rng))))};
      const double dist = -e.spatial_decay_m * std::log(1.0 - detail::uniform(rng));
      const double ang = 2.0 * std::numbers::pi * detail::uniform(rng);
      const auto [x, y] = grid.clamp_inside(vx + dist * std::cos(ang), vy + dist * std::sin(ang));
      out.messages.push_back({t, grid.point(x, y), "can't wait for " + e.name + " #" + e.hashtag + " #tonight"});
    }
  }

  const auto& prof = config.hourly_profile;
  for (int di = 0; di < config.days; ++di) {
    const Date d{config.start_date.days + di};
    const double f = day_factor(d);
    for (int r = 0; r < config.rows; ++r) {
      for (int c = 0; c < config.cols; ++c) {
        const std::string zid = Grid::zone_id(r, c);
        const std::int64_t cell = r * config.cols + c;

        auto cdr_rng = detail::stream(config.seed, "cdr", cell, d.days);
        for (int h = 0; h < 24; ++h) {
          const Instant t = make_instant(d, h, 0);
          long long v = detail::poisson(cdr_rng, config.cdr_mean * prof[h] * f, dispersion);
          if (const auto it = cdr_extra.find({r, c, t.minutes / 60}); it != cdr_extra.end()) v += it->second;
          out.cdr.push_back({zid, t, v});
        }

        auto taxi_rng = detail::stream(config.seed, "taxi", cell, d.days);
        auto chk_rng = detail::stream(config.seed, "checkin", cell, d.days);
        for (int b = 0; b < 96; ++b) {
          const int h = b / 4;
          const long long trips = detail::poisson(taxi_rng, config.taxi_mean * prof[h] * f, dispersion);
          for (long long i = 0; i < trips; ++i) {
            const auto [px, py] = grid.clamp_inside((c + detail::uniform(taxi_rng)) * config.edge_m,
                                                    (r + detail::uniform(taxi_rng)) * config.edge_m);
            const auto [qx, qy] = grid.clamp_inside(detail::uniform(taxi_rng) * grid.width_m(),
                                                    detail::uniform(taxi_rng) * grid.height_m());
            const Instant pt = make_instant(d, 0, b * 15 + static_cast<int>(detail::uniform(taxi_rng) * 15));
            const int ride = 8 + static_cast<int>(detail::uniform(taxi_rng) * 22);
            out.taxi.push_back({grid.point(px, py), pt, grid.point(qx, qy), pt.plus_minutes(ride)});
          }
          const long long chk = detail::poisson(chk_rng, config.checkin_mean * prof[h] * f, dispersion);
          for (long long i = 0; i < chk; ++i) {
            const auto vi = static_cast<std::size_t>(detail::uniform(chk_rng) * detail::kBaselineCategories.size());
            const auto [x, y] = grid.clamp_inside((c + 0.1 + 0.8 * detail::uniform(chk_rng)) * config.edge_m,
                                                  (r + 0.1 + 0.8 * detail::uniform(chk_rng)) * config.edge_m);
            const Instant t = make_instant(d, 0, b * 15 + static_cast<int>(detail::uniform(chk_rng) * 15));
            const auto user = static_cast<long long>(detail::uniform(chk_rng) * 1e9);
            out.checkins.push_back({"V" + zid.substr(1) + "_" + std::to_string(vi), t, grid.point(x, y),
                                    std::string(detail::kBaselineCategories[vi]), "u" + std::to_string(user)});
          }
        }

        auto msg_rng = detail::stream(config.seed, "messages", cell, d.days);
        for (int h = 0; h < 24; ++h) {
          const long long n = detail::poisson(msg_rng, config.message_mean * prof[h] * f, 0.0);
          for (long long i = 0; i < n; ++i) {
            const auto ti = static_cast<std::size_t>(detail::uniform(msg_rng) * detail::kBaselineTags.size());
            const auto [x, y] = grid.clamp_inside((c + detail::uniform(msg_rng)) * config.edge_m,
                                                  (r + detail::uniform(msg_rng)) * config.edge_m);
            out.messages.push_back({make_instant(d, h, static_cast<int>(detail::uniform(msg_rng) * 60)),
                                    grid.point(x, y), std::string("out and about ") + std::string(detail::kBaselineTags[ti])});
          }
        }
      }
    }
  }

  // Bus arrivals: riders since the previous arrival of the same service set
  // the loading level relative to the demand the timetable was sized for.
  for (std::size_t si = 0; si < stops.size(); ++si) {
    const auto& st = stops[si];
    auto extra = bus_extra[si];
    std::sort(extra.begin(), extra.end());
    for (int di = 0; di < config.days; ++di) {
      const Date d{config.start_date.days + di};
      const double f = day_factor(d);
      auto rng = detail::stream(config.seed, "bus", static_cast<std::int64_t>(si), d.days);
      for (std::size_t v = 0; v < st.phase.size(); ++v) {
        const std::string svc = "svc" + std::to_string(static_cast<int>(si % 97) * 10 + static_cast<int>(v));
        for (int m = st.phase[v]; m < 1440; m += config.headway_minutes) {
          const int h = m / 60;
          const Instant t = make_instant(d, 0, m);
          const double expected = config.bus_riders_mean * prof[h];
          double riders = static_cast<double>(detail::poisson(rng, expected * f, dispersion));
          // event riders waiting since this service's previous arrival
          const Instant prev = t.plus_minutes(-config.headway_minutes);
          const auto lo = std::upper_bound(extra.begin(), extra.end(), prev);
          const auto hi = std::upper_bound(extra.begin(), extra.end(), t);
          riders += static_cast<double>(hi - lo) / static_cast<double>(st.phase.size());
          const double ratio = expected > 0.0 ? riders / expected : 0.0;
          const int loading = ratio > 1.5 ? 3 : ratio > 1.0 ? 2 : 1;
          out.bus.push_back({st.id, svc, t, loading});
        }
      }
    }
  }

  const auto by_time = [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; };
  std::stable_sort(out.cdr.begin(), out.cdr.end(), by_time);
  std::stable_sort(out.bus.begin(), out.bus.end(), by_time);
  std::stable_sort(out.checkins.begin(), out.checkins.end(), by_time);
  std::stable_sort(out.messages.begin(), out.messages.end(), by_time);
  std::stable_sort(out.taxi.begin(), out.taxi.end(),
                   [](const TaxiTripRecord& a, const TaxiTripRecord& b) { return a.pickup_ts < b.pickup_ts; });
  return out;
}

/// Writes every feed, ground truth, zones and manifest.json into `dir`.
/// Returns the file names written.
inline std::vector<std::string> write_output(const SimOutput& out, const std::filesystem::path& dir,
                                             const std::string& scenario = {}) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto open = [&](const std::string& name) {
    files.push_back(name);
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("zones.geojson");
    f << out.zones_geojson.dump(1) << '\n';
  }
  {
    auto f = open("stops.csv");
    write_stops(f, out.stops);
  }
  {
    auto f = open("cdr.csv");
    write_records(f, out.cdr);
  }
  {
    auto f = open("bus.csv");
    write_records(f, out.bus);
  }
  {
    auto f = open("taxi.csv");
    write_records(f, out.taxi);
  }
  {
    auto f = open("checkins.csv");
    write_records(f, out.checkins);
  }
  {
    auto f = open("messages.csv");
    write_records(f, out.messages);
  }
  {
    auto f = open("events.csv");
    write_events(f, out.events);
  }
  nlohmann::json manifest;
  manifest["seed"] = out.seed;
  manifest["config_sha256"] = out.config_sha256;
  manifest["files"] = files;
  if (!scenario.empty()) manifest["scenario"] = scenario;
  nlohmann::json attr = nlohmann::json::object();
  for (const auto& [id, per] : out.attribution) {
    for (const auto& [ch, n] : per) attr[id][std::string(to_string(ch))] = n;
  }
  manifest["event_attribution"] = attr;
  std::ofstream mf(dir / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';
  files.push_back("manifest.json");
  return files;
}

// Scenario library ---------------------------------------------------------

inline EventSpec make_event(std::string id, std::string name, std::string hashtag, int row, int col, Date date,
                            int start_hour, EventScale scale) {
  EventSpec e;
  e.event_id = std::move(id);
  e.name = std::move(name);
  e.hashtag = std::move(hashtag);
  e.zone_row = row;
  e.zone_col = col;
  e.date = date;
  e.start_hour = start_hour;
  e.scale = scale;
  e.attendance = scale == EventScale::Small ? 600 : scale == EventScale::Medium ? 1500 : 4000;
  return e;
}

inline SimConfig scenario_baseline_quiet(std::uint64_t seed = 7) {
  SimConfig c;
  c.seed = seed;
  return c;
}

inline SimConfig scenario_concert_large(std::uint64_t seed = 7) {
  SimConfig c;
  c.seed = seed;
  auto e = make_event("E1", "Britney Spears Live", "BritneySpears", 3, 2, make_date(2017, 5, 24), 19,
                      EventScale::Large);
  e.category = "Concert Hall";
  c.events.push_back(e);
  return c;
}

/// Events of all three scales on distinct weekdays and zones; every channel
/// leads the start by 45-60 minutes.
inline SimConfig scenario_multi_scale(std::uint64_t seed = 7) {
  SimConfig c;
  c.seed = seed;
  struct Row {
    const char* name;
    const char* tag;
    int row, col;
    int month, day, hour;
    EventScale scale;
    double dx, dy;
  };
  const Row rows[] = {
      {"Symphony Night", "symphonynight", 1, 1, 5, 3, 19, EventScale::Small, 0.3, 0.6},
      {"Tech Expo", "techexpo17", 4, 4, 5, 4, 10, EventScale::Medium, 0.7, 0.4},
      {"Derby Match", "derbyday", 2, 3, 5, 9, 20, EventScale::Large, 0.5, 0.5},
      {"Jazz Evening", "jazzeve", 0, 5, 5, 11, 19, EventScale::Small, 0.6, 0.3},
      {"Food Festival", "foodfest", 3, 0, 5, 15, 12, EventScale::Medium, 0.4, 0.7},
      {"Pop Concert", "popconcert", 5, 2, 5, 17, 20, EventScale::Large, 0.5, 0.4},
      {"Book Fair", "bookfair", 1, 4, 5, 19, 11, EventScale::Small, 0.2, 0.8},
      {"Comic Con", "comiccon", 4, 1, 5, 23, 10, EventScale::Medium, 0.6, 0.6},
      {"Marathon Expo", "runexpo", 2, 2, 5, 25, 9, EventScale::Small, 0.8, 0.2},
      {"Opera Gala", "operagala", 0, 2, 5, 30, 19, EventScale::Medium, 0.5, 0.5},
      {"Cup Final", "cupfinal", 3, 5, 6, 1, 20, EventScale::Large, 0.3, 0.3},
      {"Theatre Premiere", "premiere", 5, 4, 6, 7, 19, EventScale::Small, 0.7, 0.7},
  };
  int i = 0;
  for (const auto& r : rows) {
    auto e = make_event("M" + std::to_string(++i), r.name, r.tag, r.row, r.col,
                        make_date(2017, static_cast<unsigned>(r.month), static_cast<unsigned>(r.day)), r.hour, r.scale);
    e.venue_dx = r.dx;
    e.venue_dy = r.dy;
    e.lead_minutes = {{Channel::Cdr, 60}, {Channel::Bus, 60}, {Channel::Taxi, 45}, {Channel::Checkin, 50}};
    c.events.push_back(e);
  }
  return c;
}

/// One weekday at 40% of normal activity everywhere, plus one medium event.
inline SimConfig scenario_holiday_low(std::uint64_t seed = 7) {
  SimConfig c;
  c.seed = seed;
  c.day_factors[make_date(2017, 5, 10)] = 0.4;
  c.events.push_back(make_event("H1", "Harbour Fireworks", "fireworks", 2, 2, make_date(2017, 5, 18), 20,
                                EventScale::Medium));
  return c;
}

/// A nightly show in one zone: bus riders lead by 60 minutes, taxis by 15.
inline SimConfig scenario_lead_time_split(std::uint64_t seed = 7) {
  SimConfig c;
  c.seed = seed;
  for (int di = 0; di < c.days; ++di) {
    const Date d{c.start_date.days + di};
    auto e = make_event("L" + std::to_string(di + 1), "Nightly Show", "nightlyshow", 2, 3, d, 20, EventScale::Medium);
    e.attendance = 800;
    e.lead_minutes = {{Channel::Cdr, 60}, {Channel::Bus, 60}, {Channel::Taxi, 15}, {Channel::Checkin, 30}};
    c.events.push_back(e);
  }
  return c;
}

inline std::map<std::string, SimConfig> scenario_library(std::uint64_t seed = 7) {
  return {{"baseline-quiet", scenario_baseline_quiet(seed)},
          {"concert-large", scenario_concert_large(seed)},
          {"multi-scale", scenario_multi_scale(seed)},
          {"holiday-low", scenario_holiday_low(seed)},
          {"lead-time-split", scenario_lead_time_split(seed)}};
}

}  // namespace urbanpulse::sim

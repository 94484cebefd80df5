#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "urbanpulse/error.hpp"

namespace urbanpulse {

struct GeoPoint {
  double lon{0.0};
  double lat{0.0};

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

  bool valid() const {
    return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 && lat >= -90.0 &&
           lat <= 90.0;
  }
};

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Great-circle distance on a sphere of radius kEarthRadiusM.
inline double haversine_m(GeoPoint a, GeoPoint b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(a.lat * rad) * std::cos(b.lat * rad) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

using Ring = std::vector<GeoPoint>;

/// Outer ring followed by zero or more holes.
struct Polygon {
  std::vector<Ring> rings;
};

struct BoundingBox {
  double min_lon{0}, min_lat{0}, max_lon{0}, max_lat{0};

  bool contains(GeoPoint p) const {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

namespace detail {

inline bool on_segment(GeoPoint p, GeoPoint a, GeoPoint b) {
  const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  const double scale = std::max({std::abs(b.lon - a.lon), std::abs(b.lat - a.lat), 1e-300});
  if (std::abs(cross) > 1e-12 * scale) return false;
  return p.lon >= std::min(a.lon, b.lon) - 1e-15 && p.lon <= std::max(a.lon, b.lon) + 1e-15 &&
         p.lat >= std::min(a.lat, b.lat) - 1e-15 && p.lat <= std::max(a.lat, b.lat) + 1e-15;
}

enum class RingSide { Outside, Inside, Boundary };

inline RingSide ring_side(const Ring& ring, GeoPoint p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const GeoPoint a = ring[j];
    const GeoPoint b = ring[i];
    if (on_segment(p, a, b)) return RingSide::Boundary;
    if ((b.lat > p.lat) != (a.lat > p.lat)) {
      const double x = (a.lon - b.lon) * (p.lat - b.lat) / (a.lat - b.lat) + b.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside ? RingSide::Inside : RingSide::Outside;
}

// Signed shoelace area and first moments of a closed ring.
inline void ring_moments(const Ring& ring, double& area2, double& mx, double& my) {
  area2 = mx = my = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const auto& a = ring[i];
    const auto& b = ring[i + 1];
    const double cross = a.lon * b.lat - b.lon * a.lat;
    area2 += cross;
    mx += (a.lon + b.lon) * cross;
    my += (a.lat + b.lat) * cross;
  }
}

}  // namespace detail

/// Boundary points count as inside; points on a hole boundary stay inside.
inline bool polygon_contains(const Polygon& poly, GeoPoint p) {
  if (poly.rings.empty()) return false;
  if (detail::ring_side(poly.rings.front(), p) == detail::RingSide::Outside) return false;
  for (std::size_t h = 1; h < poly.rings.size(); ++h) {
    if (detail::ring_side(poly.rings[h], p) == detail::RingSide::Inside) return false;
  }
  return true;
}

struct Zone {
  std::string zone_id;
  std::vector<Polygon> polygons;
  GeoPoint centroid;
  BoundingBox bbox;

  bool contains(GeoPoint p) const {
    if (!bbox.contains(p)) return false;
    return std::any_of(polygons.begin(), polygons.end(),
                       [&](const Polygon& poly) { return polygon_contains(poly, p); });
  }
};

/// Area-weighted centroid over all rings (holes subtract). Falls back to the
/// vertex mean for zero-area geometry.
inline GeoPoint area_centroid(const std::vector<Polygon>& polygons) {
  double area = 0.0, mx = 0.0, my = 0.0;
  double vx = 0.0, vy = 0.0;
  std::size_t nv = 0;
  for (const auto& poly : polygons) {
    for (std::size_t r = 0; r < poly.rings.size(); ++r) {
      double a2 = 0, rx = 0, ry = 0;
      detail::ring_moments(poly.rings[r], a2, rx, ry);
      // orient outer rings positive and holes negative regardless of winding
      const double sign = ((a2 >= 0) == (r == 0)) ? 1.0 : -1.0;
      area += sign * a2;
      mx += sign * rx;
      my += sign * ry;
      for (std::size_t i = 0; i + 1 < poly.rings[r].size(); ++i) {
        vx += poly.rings[r][i].lon;
        vy += poly.rings[r][i].lat;
        ++nv;
      }
    }
  }
  if (std::abs(area) < 1e-18) {
    return nv ? GeoPoint{vx / static_cast<double>(nv), vy / static_cast<double>(nv)} : GeoPoint{};
  }
  return GeoPoint{mx / (3.0 * area), my / (3.0 * area)};
}

inline Zone make_zone(std::string id, std::vector<Polygon> polygons) {
  Zone z;
  z.zone_id = std::move(id);
  z.polygons = std::move(polygons);
  BoundingBox bb{180, 90, -180, -90};
  for (const auto& poly : z.polygons) {
    for (const auto& ring : poly.rings) {
      for (const auto& p : ring) {
        bb.min_lon = std::min(bb.min_lon, p.lon);
        bb.max_lon = std::max(bb.max_lon, p.lon);
        bb.min_lat = std::min(bb.min_lat, p.lat);
        bb.max_lat = std::max(bb.max_lat, p.lat);
      }
    }
  }
  z.bbox = bb;
  z.centroid = area_centroid(z.polygons);
  return z;
}

/// Immutable set of zones ordered by zone_id.
class ZoneSet {
 public:
  ZoneSet() = default;

  explicit ZoneSet(std::vector<Zone> zones) : zones_(std::move(zones)) {
    std::sort(zones_.begin(), zones_.end(),
              [](const Zone& a, const Zone& b) { return a.zone_id < b.zone_id; });
    for (std::size_t i = 0; i < zones_.size(); ++i) {
      if (!index_.emplace(zones_[i].zone_id, i).second) {
        throw ValidationError("duplicate zone_id '" + zones_[i].zone_id + "'");
      }
    }
  }

  const std::vector<Zone>& zones() const { return zones_; }
  std::size_t size() const { return zones_.size(); }
  bool empty() const { return zones_.empty(); }

  const Zone* find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &zones_[it->second];
  }

  /// First zone by ascending zone_id whose polygon contains p.
  std::optional<std::string> point_to_zone(GeoPoint p) const {
    for (const auto& z : zones_) {
      if (z.contains(p)) return z.zone_id;
    }
    return std::nullopt;
  }

 private:
  std::vector<Zone> zones_;
  std::map<std::string, std::size_t> index_;
};

inline std::optional<std::string> point_to_zone(GeoPoint p, const ZoneSet& zones) {
  return zones.point_to_zone(p);
}

namespace detail {

inline Ring parse_ring(const nlohmann::json& j, std::size_t feature) {
  const auto where = " (feature " + std::to_string(feature) + ")";
  if (!j.is_array()) throw ParseError("ring is not an array" + where);
  Ring ring;
  ring.reserve(j.size());
  for (const auto& pos : j) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
      throw ParseError("bad position" + where);
    }
    GeoPoint p{pos[0].get<double>(), pos[1].get<double>()};
    if (!p.valid()) throw ParseError("coordinate out of range" + where);
    ring.push_back(p);
  }
  if (ring.size() < 4) throw ParseError("ring needs at least 4 positions" + where);
  if (!(ring.front() == ring.back())) throw ParseError("ring is not closed" + where);
  return ring;
}

inline Polygon parse_polygon(const nlohmann::json& j, std::size_t feature) {
  if (!j.is_array() || j.empty()) {
    throw ParseError("polygon has no rings (feature " + std::to_string(feature) + ")");
  }
  Polygon poly;
  for (const auto& r : j) poly.rings.push_back(parse_ring(r, feature));
  return poly;
}

}  // namespace detail

/// Loads an RFC 7946 FeatureCollection whose features carry a string
/// `zone_id` property and Polygon or MultiPolygon geometry.
inline ZoneSet load_zones(std::string_view geojson_document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(geojson_document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("zones: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw ParseError("zones: document is not a FeatureCollection");
  }
  std::vector<Zone> zones;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const auto where = " (feature " + std::to_string(i) + ")";
    if (!f.is_object() || !f.contains("properties") || !f["properties"].is_object()) {
      throw ParseError("zones: feature without properties" + where);
    }
    const auto& props = f["properties"];
    if (!props.contains("zone_id") || !props["zone_id"].is_string()) {
      throw ParseError("zones: missing string zone_id" + where);
    }
    if (!f.contains("geometry") || !f["geometry"].is_object()) {
      throw ParseError("zones: missing geometry" + where);
    }
    const auto& g = f["geometry"];
    const std::string type = g.value("type", "");
    if (!g.contains("coordinates")) throw ParseError("zones: geometry without coordinates" + where);
    std::vector<Polygon> polys;
    if (type == "Polygon") {
      polys.push_back(detail::parse_polygon(g["coordinates"], i));
    } else if (type == "MultiPolygon") {
      if (!g["coordinates"].is_array()) throw ParseError("zones: bad MultiPolygon" + where);
      for (const auto& p : g["coordinates"]) polys.push_back(detail::parse_polygon(p, i));
    } else {
      throw ParseError("zones: unsupported geometry '" + type + "'" + where);
    }
    zones.push_back(make_zone(props["zone_id"].get<std::string>(), std::move(polys)));
  }
  return ZoneSet(std::move(zones));
}

/// FeatureCollection with `zone_id` and centroid properties.
inline nlohmann::json zones_to_geojson(const ZoneSet& zones) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& z : zones.zones()) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& poly : z.polygons) {
      nlohmann::json rings = nlohmann::json::array();
      for (const auto& ring : poly.rings) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& p : ring) r.push_back({p.lon, p.lat});
        rings.push_back(std::move(r));
      }
      coords.push_back(std::move(rings));
    }
    nlohmann::json geometry;
    if (coords.size() == 1) {
      geometry = {{"type", "Polygon"}, {"coordinates", coords[0]}};
    } else {
      geometry = {{"type", "MultiPolygon"}, {"coordinates", coords}};
    }
    features.push_back({{"type", "Feature"},
                        {"properties",
                         {{"zone_id", z.zone_id},
                          {"centroid_lon", z.centroid.lon},
                          {"centroid_lat", z.centroid.lat}}},
                        {"geometry", std::move(geometry)}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace urbanpulse

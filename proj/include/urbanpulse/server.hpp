#pragma once

// Read-mostly HTTP/JSON API over an immutable pipeline snapshot. Source
// toggles re-fuse into a new snapshot that is swapped in atomically.

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

// pipeline.hpp pulls in Eigen, which must precede the resolver macros httplib brings in.
#include "urbanpulse/pipeline.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace urbanpulse::serve {

using nlohmann::json;

/// Everything that does not depend on the enabled-source set.
struct SnapshotBase {
  PipelineConfig config;
  ZoneSet zones;
  StopLocations stops;
  OccupancyTable table;
  ModelMap models;
  std::vector<ScoredObservation> scored;
  std::map<Detector, std::vector<AnomalyDecision>> decisions;
  std::vector<GroundTruthEvent> events;
  AnnotationCorpus corpus;
};

struct Snapshot {
  std::uint64_t version{1};
  std::shared_ptr<const SnapshotBase> base;
  std::vector<Source> enabled;
  AlignedTable aligned;
};

inline std::shared_ptr<const Snapshot> fuse_snapshot(std::shared_ptr<const SnapshotBase> base,
                                                     std::vector<Source> enabled, std::uint64_t version) {
  auto snap = std::make_shared<Snapshot>();
  snap->version = version;
  snap->enabled = std::move(enabled);
  std::sort(snap->enabled.begin(), snap->enabled.end());
  snap->aligned = align_to_zones(base->scored, base->table.schemes, snap->enabled, base->zones, base->stops);
  snap->base = std::move(base);
  return snap;
}

/// Loads raw data and whatever artifacts exist in `dir`; missing occupancy or
/// models are computed in memory with the same stage functions the CLI uses.
inline std::shared_ptr<const Snapshot> load_snapshot(const std::filesystem::path& dir, const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  auto base = std::make_shared<SnapshotBase>();
  base->config = cfg;
  auto data = pipeline::load_data(dir);
  base->table = fs::exists(dir / "occupancy.csv") ? pipeline::load_table(dir) : pipeline::build_occupancy(data, cfg);
  base->models = fs::exists(dir / "models.csv") ? pipeline::load_models(dir)
                                                : fit(base->table.series, cfg.occupancy.calendar.holidays);
  base->scored = pipeline::score(base->table, base->models).observations;
  for (auto d : {Detector::ZScore, Detector::Iqr, Detector::Shesd}) {
    base->decisions[d] = pipeline::run_detector(d, base->table, base->models, base->scored, cfg);
  }
  base->corpus = build_docs(data.messages, data.raw.checkins, data.zones, pipeline::annotation_scheme(base->table, cfg));
  base->zones = std::move(data.zones);
  base->stops = std::move(data.stops);
  base->events = std::move(data.events);
  return fuse_snapshot(std::move(base), cfg.enabled, 1);
}

/// Thrown by handlers; mapped to the status code.
struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

namespace detail {

inline std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

inline double number_param(const httplib::Request& req, const char* name, double fallback) {
  const auto v = param(req, name);
  if (!v) return fallback;
  const auto d = csv::parse_double(*v);
  if (!d) throw HttpError(400, std::string("bad number for ") + name);
  return *d;
}

inline int int_param(const httplib::Request& req, const char* name, int fallback) {
  const auto v = param(req, name);
  if (!v) return fallback;
  const auto i = csv::parse_int(*v);
  if (!i) throw HttpError(400, std::string("bad integer for ") + name);
  return static_cast<int>(*i);
}

inline Detector detector_param(const httplib::Request& req) {
  const auto v = param(req, "detector");
  if (!v) return Detector::ZScore;
  const auto d = parse_detector(*v);
  if (!d) throw HttpError(400, "unknown detector '" + *v + "'");
  return *d;
}

inline std::optional<Date> date_param(const httplib::Request& req, const Snapshot& s) {
  const auto v = param(req, "date");
  if (!v) return std::nullopt;
  Date d;
  try {
    d = parse_date(*v);
  } catch (const ParseError&) {
    throw HttpError(400, "bad date '" + *v + "'");
  }
  if (!s.base->table.period || !s.base->table.period->contains(d)) throw HttpError(404, "date outside data period");
  return d;
}

inline json cell_json(const CellKey& c) {
  return {{"zone_id", c.zone_id}, {"date", format_date(c.date)}, {"bin_of_day", c.bin_of_day}};
}

}  // namespace detail

class Server {
 public:
  explicit Server(std::shared_ptr<const Snapshot> snapshot) : snapshot_(std::move(snapshot)) { routes(); }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(swap_mutex_);
    return snapshot_;
  }

  /// Delay inserted while a re-fusion holds the write slot (tests only).
  void set_refusion_delay(std::chrono::milliseconds d) { refusion_delay_ = d; }

  /// Re-fuses for `enabled` and swaps the snapshot. Returns false when a
  /// re-fusion is already running.
  bool refuse(const std::vector<Source>& enabled, std::uint64_t* new_version = nullptr) {
    std::unique_lock write(write_mutex_, std::try_to_lock);
    if (!write.owns_lock()) return false;
    const auto current = snapshot();
    auto next = fuse_snapshot(current->base, enabled, current->version + 1);
    if (refusion_delay_.count() > 0) std::this_thread::sleep_for(refusion_delay_);
    {
      std::lock_guard lock(swap_mutex_);
      snapshot_ = next;
    }
    if (new_version) *new_version = next->version;
    return true;
  }

  httplib::Server& http() { return http_; }

  int bind_any(const std::string& host = "127.0.0.1") { return http_.bind_to_any_port(host); }
  bool listen(const std::string& host, int port) { return http_.listen(host, port); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  void wait_until_ready() const { http_.wait_until_ready(); }

  // Endpoint bodies, usable without a socket.

  static json zones(const Snapshot& s) { return zones_to_geojson(s.base->zones); }

  static json anomalies(const Snapshot& s, const httplib::Request& req) {
    const auto det = detail::detector_param(req);
    std::optional<Source> source;
    if (const auto v = detail::param(req, "source")) {
      source = parse_source_name(*v);
      if (!source) throw HttpError(400, "unknown source '" + *v + "'");
    }
    const auto date = detail::date_param(req, s);
    const auto stop_zone = stop_zones(s.base->stops, s.base->zones);
    json arr = json::array();
    for (const auto& d : s.base->decisions.at(det)) {
      if (!d.is_anomaly) continue;
      if (source && d.key.source != *source) continue;
      if (date && d.date != *date) continue;
      const auto zone = location_zone(d.key.source, d.key.location_id, stop_zone, s.base->zones);
      arr.push_back({{"source", to_string(d.key.source)},
                     {"location_id", d.key.location_id},
                     {"zone_id", zone ? json(*zone) : json(nullptr)},
                     {"date", format_date(d.date)},
                     {"bin_of_day", d.key.bin_of_day},
                     {"score", d.score},
                     {"direction", to_string(d.direction)}});
    }
    return {{"version", s.version}, {"detector", to_string(det)}, {"count", arr.size()}, {"anomalies", arr}};
  }

  static FusionPolicy policy_from(const Snapshot& s, const httplib::Request& req) {
    const auto& cfg = s.base->config;
    FusionMethod method = cfg.fusion_method;
    if (const auto v = detail::param(req, "method")) {
      const auto m = parse_fusion_method(*v);
      if (!m) throw HttpError(400, "unknown fusion method '" + *v + "'");
      method = *m;
    }
    const double S = detail::number_param(req, "S", cfg.score_threshold);
    const int n = static_cast<int>(s.enabled.size());
    FusionPolicy p;
    switch (method) {
      case FusionMethod::Mean: p = FusionPolicy::mean(S); break;
      case FusionMethod::Majority:
        p = FusionPolicy::majority(S, detail::int_param(req, "k", std::min(cfg.k, n)), n);
        break;
      case FusionMethod::Weighted: {
        std::map<Source, double> w;
        for (const auto& [src, x] : cfg.weights) {
          if (std::find(s.enabled.begin(), s.enabled.end(), src) != s.enabled.end()) w[src] = x;
        }
        p = FusionPolicy::weighted(w, S);
        break;
      }
    }
    try {
      p.validate(s.enabled);
    } catch (const ConfigError& e) {
      throw HttpError(400, e.what());
    }
    return p;
  }

  static json fused(const Snapshot& s, const httplib::Request& req) {
    const auto p = policy_from(s, req);
    const auto decisions = fuse(s.aligned, p);
    json cells = json::array();
    for (const auto& d : decisions) {
      if (!d.is_anomaly) continue;
      auto c = detail::cell_json(d.cell);
      c["fused_score"] = d.fused_score ? json(*d.fused_score) : json(nullptr);
      c["votes"] = d.votes;
      cells.push_back(std::move(c));
    }
    json sources = json::array();
    for (auto src : s.enabled) sources.push_back(to_string(src));
    return {{"version", s.version}, {"method", to_string(p.method)}, {"S", p.score_threshold},
            {"k", p.k},           {"N", s.enabled.size()},          {"sources", sources},
            {"count", cells.size()}, {"cells", cells}};
  }

  static json recall(const Snapshot& s, const httplib::Request& req) {
    if (!detail::param(req, "R")) throw HttpError(400, "missing R");
    const double R = detail::number_param(req, "R", 0.0);
    if (R < 0.0) throw HttpError(400, "R must be non-negative");
    const int offset = detail::int_param(req, "offset", s.base->config.offset_hours);
    const auto det = detail::detector_param(req);
    const auto& base = *s.base;
    if (!base.table.period) throw HttpError(404, "empty data period");
    std::vector<LocatedAnomaly> located;
    std::string label;
    const auto method = detail::param(req, "method");
    if (method && parse_source_name(*method)) {
      const auto src = *parse_source_name(*method);
      std::vector<AnomalyDecision> ds;
      for (const auto& d : base.decisions.at(det)) {
        if (d.key.source == src) ds.push_back(d);
      }
      located = locate(ds, base.table.schemes, base.zones, base.stops);
      label = to_string(src);
    } else {
      const auto p = policy_from(s, req);
      located = locate(fuse(s.aligned, p), s.aligned.scheme, base.zones);
      label = to_string(p.method);
    }
    RecallCurve curve;
    try {
      curve = recall_curve(base.events, located, *base.table.period, {R}, offset, label);
    } catch (const DomainError& e) {
      throw HttpError(404, e.what());
    }
    return {{"version", s.version}, {"label", label},           {"R", R},
            {"offset", offset},    {"recall", curve.points[0].recall}, {"eligible", curve.eligible}};
  }

  /// month -> daytype -> bin -> zone anomaly counts on the fused grid.
  static json sunburst(const Snapshot& s, const httplib::Request& req) {
    const auto det = detail::detector_param(req);
    const auto& base = *s.base;
    const auto stop_zone = stop_zones(base.stops, base.zones);
    const auto& grid = s.aligned.scheme;
    std::map<std::string, std::map<std::string, std::map<int, std::map<std::string, int>>>> tree;
    int total = 0;
    for (const auto& d : base.decisions.at(det)) {
      if (!d.is_anomaly) continue;
      const auto zone = location_zone(d.key.source, d.key.location_id, stop_zone, base.zones);
      if (!zone) continue;
      char month[32];
      std::snprintf(month, sizeof month, "%04d-%02d", year_of(d.date), month_of(d.date));
      const int bin = grid.bin_of_minute(base.table.schemes.at(d.key.source).interval(d.key.bin_of_day).first);
      ++tree[month][std::string(to_string(d.key.daytype))][bin][*zone];
      ++total;
    }
    json months = json::array();
    for (const auto& [m, dts] : tree) {
      json mj = {{"name", m}, {"count", 0}, {"children", json::array()}};
      for (const auto& [dt, bins] : dts) {
        json dj = {{"name", dt}, {"count", 0}, {"children", json::array()}};
        for (const auto& [bin, zs] : bins) {
          json bj = {{"name", grid.label(bin)}, {"bin_of_day", bin}, {"count", 0}, {"children", json::array()}};
          for (const auto& [z, n] : zs) {
            bj["children"].push_back({{"name", z}, {"count", n}});
            bj["count"] = bj["count"].get<int>() + n;
          }
          dj["count"] = dj["count"].get<int>() + bj["count"].get<int>();
          dj["children"].push_back(std::move(bj));
        }
        mj["count"] = mj["count"].get<int>() + dj["count"].get<int>();
        mj["children"].push_back(std::move(dj));
      }
      months.push_back(std::move(mj));
    }
    return {{"version", s.version}, {"detector", to_string(det)}, {"name", "anomalies"},
            {"total", total},        {"children", months}};
  }

  static json annotations(const Snapshot& s, const httplib::Request& req) {
    const auto& base = *s.base;
    const auto zone = detail::param(req, "zone");
    if (!zone || !detail::param(req, "date") || !detail::param(req, "bin")) {
      throw HttpError(400, "zone, date and bin are required");
    }
    if (!base.zones.find(*zone)) throw HttpError(404, "unknown zone '" + *zone + "'");
    const auto date = detail::date_param(req, s);
    const int bin = detail::int_param(req, "bin", 0);
    if (bin < 0 || bin >= base.corpus.scheme.bins_per_day()) throw HttpError(400, "bin out of range");
    const int k = detail::int_param(req, "k", base.config.top_k);
    if (k <= 0) throw HttpError(400, "k must be positive");
    const CellKey cell{*zone, *date, bin};
    json terms = json::array();
    if (base.corpus.find(cell)) terms = to_json(tfidf_top_k(base.corpus, cell, k));
    return {{"version", s.version}, {"cell", detail::cell_json(cell)}, {"terms", terms}};
  }

  /// Ground truth plus, per source, the nearest anomalous zone in the
  /// evaluation window.
  static json events(const Snapshot& s, const httplib::Request& req) {
    const auto det = detail::detector_param(req);
    const int offset = detail::int_param(req, "offset", s.base->config.offset_hours);
    const auto& base = *s.base;
    std::map<Source, std::vector<AnomalyDecision>> per_source;
    for (const auto& d : base.decisions.at(det)) {
      if (d.is_anomaly) per_source[d.key.source].push_back(d);
    }
    std::map<Source, std::vector<LocatedAnomaly>> located;
    for (const auto& [src, ds] : per_source) located[src] = locate(ds, base.table.schemes, base.zones, base.stops);
    json arr = json::array();
    for (const auto& e : base.events) {
      json nearest = json::object();
      for (const auto& [src, la] : located) {
        const auto w = target_window(e, offset);
        const LocatedAnomaly* best = nullptr;
        double best_d = 0.0;
        for (const auto& a : la) {
          if (!window_matches(a, w)) continue;
          const double dist = haversine_m(a.point, e.venue);
          if (!best || dist < best_d || (dist == best_d && a.zone_id < best->zone_id)) {
            best = &a;
            best_d = dist;
          }
        }
        nearest[std::string(to_string(src))] =
            best ? json{{"zone_id", best->zone_id}, {"distance_m", best_d}, {"lat", best->point.lat},
                        {"lon", best->point.lon}}
                 : json(nullptr);
      }
      arr.push_back({{"event_id", e.event_id},
                     {"name", e.name},
                     {"lat", e.venue.lat},
                     {"lon", e.venue.lon},
                     {"start_ts", format_instant(e.start)},
                     {"end_ts", format_instant(e.end)},
                     {"scale", to_string(e.scale)},
                     {"nearest", nearest}});
    }
    return {{"version", s.version}, {"detector", to_string(det)}, {"offset", offset}, {"events", arr}};
  }

 private:
  template <typename Fn>
  void get(const std::string& path, Fn fn) {
    http_.Get(path, [this, fn](const httplib::Request& req, httplib::Response& res) {
      const auto snap = snapshot();
      respond(res, [&] { return fn(*snap, req); });
    });
  }

  template <typename Fn>
  static void respond(httplib::Response& res, Fn&& body) {
    try {
      res.set_content(body().dump(), "application/json");
    } catch (const HttpError& e) {
      res.status = e.status;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  }

  void routes() {
    get("/zones", [](const Snapshot& s, const httplib::Request&) { return zones(s); });
    get("/anomalies", [](const Snapshot& s, const httplib::Request& r) { return anomalies(s, r); });
    get("/fused", [](const Snapshot& s, const httplib::Request& r) { return fused(s, r); });
    get("/recall", [](const Snapshot& s, const httplib::Request& r) { return recall(s, r); });
    get("/sunburst", [](const Snapshot& s, const httplib::Request& r) { return sunburst(s, r); });
    get("/annotations", [](const Snapshot& s, const httplib::Request& r) { return annotations(s, r); });
    get("/events", [](const Snapshot& s, const httplib::Request& r) { return events(s, r); });
    get("/version", [](const Snapshot& s, const httplib::Request&) { return json{{"version", s.version}}; });
    http_.Put("/config/sources", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] {
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::parse_error&) {
          throw HttpError(400, "body is not JSON");
        }
        if (!body.is_object() || !body.contains("enabled") || !body["enabled"].is_array()) {
          throw HttpError(400, "expected {\"enabled\": [...]}");
        }
        std::vector<Source> enabled;
        for (const auto& v : body["enabled"]) {
          if (!v.is_string()) throw HttpError(400, "source names must be strings");
          const auto src = parse_source_name(v.get<std::string>());
          if (!src) throw HttpError(400, "unknown source '" + v.get<std::string>() + "'");
          if (std::find(enabled.begin(), enabled.end(), *src) == enabled.end()) enabled.push_back(*src);
        }
        if (enabled.empty()) throw HttpError(400, "at least one source must stay enabled");
        const auto current = snapshot();
        for (auto src : enabled) {
          if (!current->base->table.schemes.contains(src)) {
            throw HttpError(400, "no data for source " + std::string(to_string(src)));
          }
        }
        std::uint64_t version = 0;
        try {
          if (!refuse(enabled, &version)) throw HttpError(409, "re-fusion already in progress");
        } catch (const ConfigError& e) {
          throw HttpError(400, e.what());
        }
        json names = json::array();
        std::sort(enabled.begin(), enabled.end());
        for (auto src : enabled) names.push_back(to_string(src));
        return json{{"version", version}, {"enabled", names}};
      });
    });
  }

  httplib::Server http_;
  mutable std::mutex swap_mutex_;
  std::mutex write_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::chrono::milliseconds refusion_delay_{0};
};

}  // namespace urbanpulse::serve

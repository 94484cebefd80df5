#pragma once

// Stage runners over a data directory: raw feeds in, CSV artifacts out.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "urbanpulse/annotate.hpp"
#include "urbanpulse/config.hpp"
#include "urbanpulse/detect.hpp"
#include "urbanpulse/evaluate.hpp"
#include "urbanpulse/fuse.hpp"
#include "urbanpulse/granger.hpp"
#include "urbanpulse/ingest.hpp"
#include "urbanpulse/normalcy.hpp"
#include "urbanpulse/shapiro_wilk.hpp"

namespace urbanpulse::pipeline {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

template <typename Fn>
void write_with(const fs::path& p, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_file(p, ss.str());
}

/// Everything read from a data directory. Absent optional files leave the
/// matching member empty.
struct DataBundle {
  ZoneSet zones;
  StopLocations stops;
  RawDataset raw;
  std::vector<MessageRecord> messages;
  std::vector<GroundTruthEvent> events;
  std::map<std::string, std::vector<Rejection>> rejections;  // file -> rows
};

template <typename Record>
std::vector<Record> load_feed(const fs::path& dir, const std::string& name, DataBundle& bundle) {
  const auto p = dir / name;
  if (!fs::exists(p)) return {};
  std::ifstream in(p, std::ios::binary);
  try {
    auto res = parse_records<Record>(in);
    if (!res.rejections.empty()) bundle.rejections[name] = std::move(res.rejections);
    return std::move(res.records);
  } catch (const ParseError& e) {
    throw ParseError(name + ": " + e.what());
  }
}

inline DataBundle load_data(const fs::path& dir) {
  DataBundle b;
  if (fs::exists(dir / "zones.geojson")) b.zones = load_zones(read_file(dir / "zones.geojson"));
  if (fs::exists(dir / "stops.csv")) {
    std::ifstream in(dir / "stops.csv", std::ios::binary);
    b.stops = parse_stops(in);
  }
  b.raw.cdr = load_feed<CdrRecord>(dir, "cdr.csv", b);
  b.raw.bus = load_feed<BusArrivalRecord>(dir, "bus.csv", b);
  b.raw.taxi = load_feed<TaxiTripRecord>(dir, "taxi.csv", b);
  b.raw.checkins = load_feed<CheckinRecord>(dir, "checkins.csv", b);
  b.messages = load_feed<MessageRecord>(dir, "messages.csv", b);
  if (fs::exists(dir / "events.csv")) {
    std::ifstream in(dir / "events.csv", std::ios::binary);
    b.events = read_events(in);
  }
  return b;
}

inline OccupancyTable build_occupancy(const DataBundle& data, const PipelineConfig& cfg, IngestReport* report = nullptr) {
  auto res = compute_occupancy(data.raw, data.zones, cfg.occupancy);
  if (report) *report = res.report;
  if (cfg.coarse_bins) return coarse_rebin(res.table);
  return std::move(res.table);
}

inline ScoringResult score(const OccupancyTable& table, const ModelMap& models) {
  auto res = score_observations(table.series, models);
  normalize_scores(res.observations);
  return res;
}

inline std::vector<AnomalyDecision> run_detector(Detector det, const OccupancyTable& table, const ModelMap& models,
                                                 const std::vector<ScoredObservation>& scored,
                                                 const PipelineConfig& cfg, ShesdReport* report = nullptr) {
  std::vector<AnomalyDecision> out;
  switch (det) {
    case Detector::ZScore: out = detect_zscore(scored, cfg.z_threshold); break;
    case Detector::Iqr: out = detect_iqr(table.series, models, cfg.iqr_multiplier); break;
    case Detector::Shesd: out = detect_shesd(scored, table.schemes, cfg.esd, report); break;
  }
  sort_decisions(out);
  return out;
}

inline std::string decisions_file(Detector d) { return "decisions_" + std::string(to_string(d)) + ".csv"; }

inline std::string fused_file(FusionMethod m) {
  std::string s(to_string(m));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return "fused_" + s + ".csv";
}

// Stage wrappers --------------------------------------------------------------

inline nlohmann::json report_json(const IngestReport& r, const DataBundle& b) {
  nlohmann::json j;
  j["cdr_unknown_zone"] = r.cdr_unknown_zone;
  j["taxi_pickup_outside"] = r.taxi_pickup_outside;
  j["taxi_dropoff_outside"] = r.taxi_dropoff_outside;
  j["checkin_outside"] = r.checkin_outside;
  j["outside_period"] = r.outside_period;
  j["checkin_definition"] = r.checkin_definition;
  nlohmann::json rej = nlohmann::json::object();
  for (const auto& [file, rows] : b.rejections) {
    auto& arr = rej[file] = nlohmann::json::array();
    for (const auto& x : rows) arr.push_back({{"line", x.line}, {"reason", x.reason}});
  }
  j["rejected"] = rej;
  return j;
}

/// Raw feeds -> occupancy.csv, bins.csv, ingest_report.json.
inline IngestReport stage_ingest(const fs::path& dir, const PipelineConfig& cfg) {
  const auto data = load_data(dir);
  IngestReport report;
  const auto table = build_occupancy(data, cfg, &report);
  write_with(dir / "occupancy.csv", [&](std::ostream& o) { write_occupancy(o, table); });
  write_with(dir / "bins.csv", [&](std::ostream& o) { write_bin_schemes(o, table); });
  write_file(dir / "ingest_report.json", report_json(report, data).dump(2) + "\n");
  return report;
}

inline OccupancyTable load_table(const fs::path& dir) {
  std::ifstream occ(dir / "occupancy.csv", std::ios::binary), bins(dir / "bins.csv", std::ios::binary);
  if (!occ || !bins) throw ConfigError("occupancy.csv / bins.csv missing in " + dir.string() + " (run ingest)");
  return read_occupancy(occ, bins);
}

inline ModelMap load_models(const fs::path& dir) {
  std::ifstream in(dir / "models.csv", std::ios::binary);
  if (!in) throw ConfigError("models.csv missing in " + dir.string() + " (run fit)");
  return read_models(in);
}

inline ModelMap stage_fit(const fs::path& dir, const PipelineConfig& cfg) {
  const auto table = load_table(dir);
  auto models = fit(table.series, cfg.occupancy.calendar.holidays);
  write_with(dir / "models.csv", [&](std::ostream& o) { write_models(o, models); });
  return models;
}

inline std::vector<AnomalyDecision> stage_detect(const fs::path& dir, const PipelineConfig& cfg, Detector det,
                                                 bool include_normal = false) {
  const auto table = load_table(dir);
  const auto models = load_models(dir);
  const auto scored = score(table, models);
  auto decisions = run_detector(det, table, models, scored.observations, cfg);
  write_with(dir / decisions_file(det), [&](std::ostream& o) { write_decisions(o, decisions, !include_normal); });
  return decisions;
}

inline AlignedTable aligned_scores(const OccupancyTable& table, const ModelMap& models,
                                   const std::vector<Source>& enabled, const ZoneSet& zones,
                                   const StopLocations& stops) {
  const auto scored = score(table, models);
  return align_to_zones(scored.observations, table.schemes, enabled, zones, stops);
}

inline std::vector<FusedDecision> stage_fuse(const fs::path& dir, const PipelineConfig& cfg, bool include_normal = false) {
  const auto table = load_table(dir);
  const auto models = load_models(dir);
  const auto data_zones = fs::exists(dir / "zones.geojson") ? load_zones(read_file(dir / "zones.geojson")) : ZoneSet{};
  StopLocations stops;
  if (fs::exists(dir / "stops.csv")) {
    std::ifstream in(dir / "stops.csv", std::ios::binary);
    stops = parse_stops(in);
  }
  const auto aligned = aligned_scores(table, models, cfg.enabled, data_zones, stops);
  auto fused = fuse(aligned, cfg.policy());
  write_with(dir / fused_file(cfg.fusion_method),
             [&](std::ostream& o) { write_fused(o, cfg.fusion_method, fused, !include_normal); });
  return fused;
}

inline std::vector<AnomalyDecision> load_decisions(const fs::path& dir, Detector det) {
  std::ifstream in(dir / decisions_file(det), std::ios::binary);
  if (!in) throw ConfigError(decisions_file(det) + " missing in " + dir.string() + " (run detect)");
  return read_decisions(in);
}

/// Recall curves per source for one detector, plus the fused curve when a
/// fused artifact for the configured method exists.
inline std::vector<RecallCurve> recall_curves(const std::vector<AnomalyDecision>& decisions,
                                              const std::optional<std::vector<FusedDecision>>& fused,
                                              const OccupancyTable& table, const ZoneSet& zones,
                                              const StopLocations& stops, const std::vector<GroundTruthEvent>& events,
                                              const PipelineConfig& cfg) {
  if (!table.period) throw DomainError("empty data period");
  std::map<Source, std::vector<AnomalyDecision>> per_source;
  for (const auto& d : decisions) per_source[d.key.source].push_back(d);
  std::vector<RecallCurve> curves;
  for (const auto& [src, ds] : per_source) {
    curves.push_back(recall_curve(events, locate(ds, table.schemes, zones, stops), *table.period, cfg.radii,
                                  cfg.offset_hours, std::string(to_string(src))));
  }
  if (fused) {
    std::vector<BinScheme> used;
    for (auto s : cfg.enabled) {
      if (table.schemes.contains(s)) used.push_back(table.schemes.at(s));
    }
    curves.push_back(recall_curve(events, locate(*fused, coarsest_scheme(used), zones), *table.period, cfg.radii,
                                  cfg.offset_hours, std::string(to_string(cfg.fusion_method))));
  }
  return curves;
}

inline std::vector<RecallCurve> stage_eval(const fs::path& dir, const PipelineConfig& cfg, Detector det) {
  const auto data = load_data(dir);
  const auto table = load_table(dir);
  const auto decisions = load_decisions(dir, det);
  std::optional<std::vector<FusedDecision>> fused;
  if (fs::exists(dir / fused_file(cfg.fusion_method))) {
    std::ifstream in(dir / fused_file(cfg.fusion_method), std::ios::binary);
    fused = read_fused(in);
  }
  const auto curves = recall_curves(decisions, fused, table, data.zones, data.stops, data.events, cfg);
  write_with(dir / "recall.csv", [&](std::ostream& o) { write_curves(o, curves); });
  return curves;
}

/// Sweep entries: every enabled source alone, MEAN, MAJORITY, and WEIGHTED
/// when weights are configured.
inline std::vector<SweepEntry> default_sweep_entries(const PipelineConfig& cfg) {
  std::vector<SweepEntry> entries;
  for (auto s : cfg.enabled) entries.push_back({std::string(to_string(s)), FusionPolicy::weighted({{s, 1.0}}, 0.0)});
  entries.push_back({"MEAN", FusionPolicy::mean(0.0)});
  entries.push_back({"MAJORITY", FusionPolicy::majority(0.0, cfg.k, static_cast<int>(cfg.enabled.size()))});
  if (!cfg.weights.empty()) entries.push_back({"WEIGHTED", FusionPolicy::weighted(cfg.weights, 0.0)});
  return entries;
}

inline std::vector<SweepCell> stage_sweep(const fs::path& dir, const PipelineConfig& cfg,
                                          const std::vector<double>& thresholds) {
  const auto data = load_data(dir);
  const auto table = load_table(dir);
  const auto models = load_models(dir);
  if (!table.period) throw DomainError("empty data period");
  const auto aligned = aligned_scores(table, models, cfg.enabled, data.zones, data.stops);
  const auto cells = sweep(data.events, aligned, data.zones, *table.period, cfg.radii, thresholds,
                           default_sweep_entries(cfg), cfg.offset_hours);
  write_with(dir / "sweep.csv", [&](std::ostream& o) { write_sweep(o, cells); });
  return cells;
}

/// Continuous per-zone series for one source at `resolution` minutes over the
/// whole period: counts are summed, BUS loadings averaged across the zone's
/// stops. Zones with any empty window map to nullopt.
inline std::map<std::string, std::optional<std::vector<double>>> zone_series(const OccupancyTable& table, Source source,
                                                                             int resolution, const ZoneSet& zones,
                                                                             const StopLocations& stops) {
  std::map<std::string, std::optional<std::vector<double>>> out;
  const auto sit = table.schemes.find(source);
  if (sit == table.schemes.end() || !table.period) return out;
  const auto& scheme = sit->second;
  if (scheme.coarse || resolution % scheme.width_minutes != 0) {
    throw ConfigError("cannot build " + std::to_string(resolution) + "-minute series from " +
                      std::string(to_string(source)) + " bins of " + scheme.to_string());
  }
  const int per_day = 1440 / resolution;
  const auto len = static_cast<std::size_t>(table.period->days() * per_day);
  const auto stop_zone = stop_zones(stops, zones);
  std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> acc;
  for (const auto& [key, series] : table.series) {
    if (key.source != source) continue;
    const auto zone = location_zone(source, key.location_id, stop_zone, zones);
    if (!zone) continue;
    auto& [sum, cnt] = acc[*zone];
    if (sum.empty()) {
      sum.assign(len, 0.0);
      cnt.assign(len, 0);
    }
    const int slot = scheme.interval(key.bin_of_day).first / resolution;
    for (const auto& s : series.samples) {
      const auto t = static_cast<std::size_t>((s.date.days - table.period->first.days) * per_day + slot);
      sum[t] += s.value;
      ++cnt[t];
    }
  }
  for (auto& [zone, sc] : acc) {
    auto& [sum, cnt] = sc;
    bool gap = false;
    for (std::size_t t = 0; t < len; ++t) {
      if (cnt[t] == 0) {
        gap = true;
        break;
      }
      if (source == Source::Bus) sum[t] /= cnt[t];
    }
    out[zone] = gap ? std::nullopt : std::optional<std::vector<double>>(std::move(sum));
  }
  return out;
}

struct GrangerRun {
  std::vector<GrangerResult> results;
  std::vector<std::tuple<std::string, std::string, std::string>> failed;  // zone, x, y
};

/// Pairwise tests per zone among the enabled sources whose bins fit the
/// configured resolution.
inline GrangerRun granger_by_zone(const OccupancyTable& table, const ZoneSet& zones, const StopLocations& stops,
                                  const PipelineConfig& cfg) {
  std::map<std::string, std::map<std::string, std::optional<std::vector<double>>>> by_zone;
  for (auto s : cfg.enabled) {
    const auto it = table.schemes.find(s);
    if (it == table.schemes.end() || it->second.coarse || cfg.granger_bin_minutes % it->second.width_minutes != 0) {
      continue;
    }
    for (auto& [zone, v] : zone_series(table, s, cfg.granger_bin_minutes, zones, stops)) {
      by_zone[zone][std::string(to_string(s))] = std::move(v);
    }
  }
  GrangerRun run;
  for (const auto& [zone, per_source] : by_zone) {
    std::map<std::string, std::vector<double>> usable;
    for (const auto& [label, v] : per_source) {
      if (v) {
        usable[label] = *v;
      } else {
        for (const auto& [other, w] : per_source) {
          if (other != label) {
            run.failed.emplace_back(zone, label, other);
            run.failed.emplace_back(zone, other, label);
          }
        }
      }
    }
    if (usable.size() < 2) continue;
    auto pw = pairwise_granger(usable, cfg.granger_lag);
    for (auto& r : pw.results) {
      r.group = zone;
      run.results.push_back(std::move(r));
    }
    for (auto& [x, y] : pw.failed) run.failed.emplace_back(zone, x, y);
  }
  return run;
}

inline GrangerRun stage_granger(const fs::path& dir, const PipelineConfig& cfg) {
  const auto data = load_data(dir);
  const auto table = load_table(dir);
  auto run = granger_by_zone(table, data.zones, data.stops, cfg);
  write_with(dir / "granger.csv", [&](std::ostream& o) { write_granger(o, run.results); });
  write_with(dir / "granger_summary.csv",
             [&](std::ostream& o) { write_granger_summary(o, summarize_granger(run.results)); });
  return run;
}

struct NormalityRow {
  Source source{Source::Cdr};
  std::string location_id;
  int hour{0};
  std::size_t n{0};
  double w{0.0};
  double p{0.0};
};

/// Shapiro-Wilk per (source, location, hour of day) over non-holiday weekdays,
/// finer bins aggregated to the hour. Series that cannot be tested are
/// counted in `skipped`.
inline std::vector<NormalityRow> normality_by_hour(const OccupancyTable& table, const std::set<Date>& holidays,
                                                   std::size_t* skipped = nullptr) {
  std::map<std::tuple<Source, std::string, int>, std::map<int, std::pair<double, int>>> acc;
  for (const auto& [key, series] : table.series) {
    if (key.daytype != DayType::Weekday) continue;
    const auto& scheme = table.schemes.at(key.source);
    if (scheme.coarse || 60 % scheme.width_minutes != 0) continue;
    const int hour = scheme.interval(key.bin_of_day).first / 60;
    auto& m = acc[{key.source, key.location_id, hour}];
    for (const auto& s : series.samples) {
      if (holidays.contains(s.date)) continue;
      auto& [sum, n] = m[s.date.days];
      sum += s.value;
      ++n;
    }
  }
  std::vector<NormalityRow> out;
  std::size_t skip = 0;
  for (const auto& [k, m] : acc) {
    const auto& [src, loc, hour] = k;
    std::vector<double> v;
    for (const auto& [day, sn] : m) v.push_back(src == Source::Bus ? sn.first / sn.second : sn.first);
    try {
      const auto r = shapiro_wilk(v);
      out.push_back({src, loc, hour, v.size(), r.w, r.p_value});
    } catch (const DomainError&) {
      ++skip;
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

inline std::vector<NormalityRow> stage_normality(const fs::path& dir, const PipelineConfig& cfg) {
  const auto table = load_table(dir);
  const auto rows = normality_by_hour(table, cfg.occupancy.calendar.holidays);
  write_with(dir / "normality.csv", [&](std::ostream& o) {
    csv::Writer w(o);
    w.row("source", "location_id", "hour", "n", "w", "p");
    for (const auto& r : rows) w.row(to_string(r.source), r.location_id, r.hour, r.n, r.w, r.p);
  });
  return rows;
}

/// Annotation scheme: the fused grid of the enabled sources (hourly by
/// default), so annotated cells line up with fused decisions.
inline BinScheme annotation_scheme(const OccupancyTable& table, const PipelineConfig& cfg) {
  std::vector<BinScheme> used;
  for (auto s : cfg.enabled) {
    if (table.schemes.contains(s)) used.push_back(table.schemes.at(s));
  }
  return used.empty() ? BinScheme::fixed(60) : coarsest_scheme(used);
}

}  // namespace urbanpulse::pipeline

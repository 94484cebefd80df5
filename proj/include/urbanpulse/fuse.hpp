#pragma once

// Score- and decision-level fusion of per-source evidence on a common
// (zone, date, bin) grid.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "urbanpulse/bins.hpp"
#include "urbanpulse/geo.hpp"
#include "urbanpulse/normalcy.hpp"
#include "urbanpulse/records.hpp"

namespace urbanpulse {

enum class FusionMethod { Weighted, Mean, Majority };

inline std::string_view to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::Weighted: return "WEIGHTED";
    case FusionMethod::Mean: return "MEAN";
    case FusionMethod::Majority: return "MAJORITY";
  }
  return "?";
}

inline std::optional<FusionMethod> parse_fusion_method(std::string_view s) {
  if (s == "WEIGHTED" || s == "weighted") return FusionMethod::Weighted;
  if (s == "MEAN" || s == "mean") return FusionMethod::Mean;
  if (s == "MAJORITY" || s == "majority") return FusionMethod::Majority;
  return std::nullopt;
}

struct FusionPolicy {
  FusionMethod method{FusionMethod::Majority};
  std::map<Source, double> weights;  // WEIGHTED only
  double score_threshold{0.8};       // S, on normalized scores
  int k{2};
  int n_required{3};  // N, the number of enabled channels

  /// Checks the policy against the enabled sources.
  void validate(const std::vector<Source>& enabled) const {
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) throw ConfigError("S must lie in [0, 1]");
    if (method == FusionMethod::Majority) {
      if (n_required != static_cast<int>(enabled.size())) {
        throw ConfigError("majority N must equal the number of enabled sources");
      }
      if (k < 1 || k > n_required) throw ConfigError("majority vote needs 1 <= k <= N");
    }
    if (method == FusionMethod::Weighted) {
      double total = 0.0;
      for (const auto& [src, w] : weights) {
        if (w < 0.0) throw ConfigError("fusion weights must be non-negative");
        if (std::find(enabled.begin(), enabled.end(), src) == enabled.end()) {
          throw ConfigError("weight given for disabled source " + std::string(to_string(src)));
        }
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-9) throw ConfigError("fusion weights must sum to 1");
    }
  }

  static FusionPolicy mean(double s) { return {FusionMethod::Mean, {}, s, 1, 1}; }
  static FusionPolicy majority(double s, int k, int n) { return {FusionMethod::Majority, {}, s, k, n}; }
  static FusionPolicy weighted(std::map<Source, double> w, double s) {
    return {FusionMethod::Weighted, std::move(w), s, 1, 1};
  }
};

struct CellKey {
  std::string zone_id;
  Date date;
  int bin_of_day{0};

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

/// Normalized scores per enabled source on the harmonized grid. A source
/// absent from a cell's map is missing there (not zero).
struct AlignedTable {
  BinScheme scheme;
  std::vector<Source> sources;
  std::map<CellKey, std::map<Source, double>> cells;
};

/// The coarsest scheme among `schemes`; every finer bin must nest in one
/// coarse bin.
inline BinScheme coarsest_scheme(const std::vector<BinScheme>& schemes) {
  if (schemes.empty()) throw ConfigError("no sources to harmonize");
  BinScheme target = schemes.front();
  for (const auto& s : schemes) {
    if (s.coarse || (!target.coarse && s.width_minutes > target.width_minutes)) target = s;
  }
  for (const auto& s : schemes) {
    for (int b = 0; b < s.bins_per_day(); ++b) {
      const auto [start, end] = s.interval(b);
      if (target.bin_of_minute(start) != target.bin_of_minute(end - 1)) {
        throw ConfigError("bin scheme " + s.to_string() + " does not nest in " + target.to_string());
      }
    }
  }
  return target;
}

/// Maps each BUS stop to the zone containing it.
inline std::map<std::string, std::string> stop_zones(const StopLocations& stops, const ZoneSet& zones) {
  std::map<std::string, std::string> out;
  for (const auto& [id, p] : stops) {
    if (auto z = zones.point_to_zone(p)) out.emplace(id, *z);
  }
  return out;
}

/// Resolves a series location to a zone id (identity except for BUS stops).
inline std::optional<std::string> location_zone(Source s, const std::string& location,
                                                const std::map<std::string, std::string>& stop_zone,
                                                const ZoneSet& zones) {
  if (s == Source::Bus) {
    const auto it = stop_zone.find(location);
    if (it == stop_zone.end()) return std::nullopt;
    return it->second;
  }
  if (!zones.empty() && !zones.find(location)) return std::nullopt;
  return location;
}

/// Max-pools normalized scores of the enabled sources into one row per
/// (zone, date, coarsest bin). BUS stop scores pool into their zone.
inline AlignedTable align_to_zones(const std::vector<ScoredObservation>& observations,
                                   const std::map<Source, BinScheme>& schemes, const std::vector<Source>& enabled,
                                   const ZoneSet& zones, const StopLocations& stops) {
  AlignedTable table;
  table.sources = enabled;
  std::sort(table.sources.begin(), table.sources.end());
  std::vector<BinScheme> used;
  for (auto s : table.sources) {
    const auto it = schemes.find(s);
    if (it == schemes.end()) throw ConfigError("no occupancy for enabled source " + std::string(to_string(s)));
    used.push_back(it->second);
    if (s == Source::Bus && stops.empty()) throw ConfigError("BUS fusion needs stop coordinates (stops.csv)");
  }
  table.scheme = coarsest_scheme(used);
  const auto stop_zone = stop_zones(stops, zones);
  const std::set<Source> on(table.sources.begin(), table.sources.end());
  for (const auto& o : observations) {
    if (!on.contains(o.key.source)) continue;
    const auto zone = location_zone(o.key.source, o.key.location_id, stop_zone, zones);
    if (!zone) continue;
    const auto [start, end] = schemes.at(o.key.source).interval(o.key.bin_of_day);
    CellKey cell{*zone, o.date, table.scheme.bin_of_minute(start)};
    auto& row = table.cells[cell];
    const auto [it, inserted] = row.emplace(o.key.source, o.normalized_z);
    if (!inserted) it->second = std::max(it->second, o.normalized_z);
  }
  return table;
}

struct FusedDecision {
  CellKey cell;
  std::optional<double> fused_score;  // absent for MAJORITY
  int votes{0};
  bool is_anomaly{false};
  std::vector<Source> contributing_sources;  // sources present in the cell
};

inline std::vector<FusedDecision> fuse_weighted(const AlignedTable& table, const FusionPolicy& policy) {
  std::map<Source, double> weights = policy.weights;
  if (policy.method == FusionMethod::Mean) {
    weights.clear();
    for (auto s : table.sources) weights[s] = 1.0 / static_cast<double>(table.sources.size());
  } else if (policy.method != FusionMethod::Weighted) {
    throw ConfigError("fuse_weighted needs a WEIGHTED or MEAN policy");
  }
  std::vector<FusedDecision> out;
  for (const auto& [cell, scores] : table.cells) {
    FusedDecision d;
    d.cell = cell;
    double present_weight = 0.0;
    bool all_present = true;
    for (auto s : table.sources) {
      const auto it = scores.find(s);
      if (it == scores.end()) {
        all_present = false;
        continue;
      }
      d.contributing_sources.push_back(s);
      if (it->second >= policy.score_threshold) ++d.votes;
      const auto w = weights.find(s);
      if (w != weights.end()) present_weight += w->second;
    }
    if (d.contributing_sources.empty() || present_weight <= 0.0) continue;
    const double norm = all_present ? 1.0 : present_weight;
    double fused = 0.0;
    for (auto s : d.contributing_sources) {
      const auto w = weights.find(s);
      if (w != weights.end()) fused += (w->second / norm) * scores.at(s);
    }
    d.fused_score = fused;
    d.is_anomaly = fused >= policy.score_threshold;
    out.push_back(std::move(d));
  }
  return out;
}

/// k-of-N voting; a source votes when its normalized score reaches S. Missing
/// sources cast no vote.
inline std::vector<FusedDecision> fuse_majority(const AlignedTable& table, const FusionPolicy& policy) {
  std::vector<FusedDecision> out;
  out.reserve(table.cells.size());
  for (const auto& [cell, scores] : table.cells) {
    FusedDecision d;
    d.cell = cell;
    for (auto s : table.sources) {
      const auto it = scores.find(s);
      if (it == scores.end()) continue;
      d.contributing_sources.push_back(s);
      if (it->second >= policy.score_threshold) ++d.votes;
    }
    d.is_anomaly = d.votes >= policy.k;
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<FusedDecision> fuse(const AlignedTable& table, const FusionPolicy& policy) {
  policy.validate(table.sources);
  return policy.method == FusionMethod::Majority ? fuse_majority(table, policy) : fuse_weighted(table, policy);
}

// Fused dump: `method,zone_id,date,bin_of_day,fused_score,votes,is_anomaly`.

inline void write_fused(std::ostream& out, FusionMethod method, const std::vector<FusedDecision>& decisions,
                        bool anomalies_only) {
  csv::Writer w(out);
  w.row("method", "zone_id", "date", "bin_of_day", "fused_score", "votes", "is_anomaly");
  for (const auto& d : decisions) {
    if (anomalies_only && !d.is_anomaly) continue;
    w.row(to_string(method), d.cell.zone_id, format_date(d.cell.date), d.cell.bin_of_day,
          d.fused_score ? csv::format_double(*d.fused_score) : std::string(), d.votes, d.is_anomaly);
  }
}

inline std::vector<FusedDecision> read_fused(std::istream& in) {
  std::vector<FusedDecision> out;
  csv::Reader r(in);
  std::vector<std::string> f;
  if (!r.next(f)) throw ParseError("fused: missing header");
  csv::require_header(f, {"method", "zone_id", "date", "bin_of_day", "fused_score", "votes", "is_anomaly"}, "fused");
  while (r.next(f)) {
    const auto where = " at line " + std::to_string(r.line_number());
    if (f.size() != 7) throw ParseError("fused: bad row" + where);
    const auto bin = csv::parse_int(f[3]);
    const auto votes = csv::parse_int(f[5]);
    if (!bin || !votes || (f[6] != "0" && f[6] != "1")) throw ParseError("fused: bad field" + where);
    FusedDecision d;
    d.cell = CellKey{f[1], parse_date(f[2]), static_cast<int>(*bin)};
    if (!f[4].empty()) {
      const auto s = csv::parse_double(f[4]);
      if (!s) throw ParseError("fused: bad score" + where);
      d.fused_score = *s;
    }
    d.votes = static_cast<int>(*votes);
    d.is_anomaly = f[6] == "1";
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace urbanpulse

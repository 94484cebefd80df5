#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "urbanpulse/esd.hpp"
#include "urbanpulse/normalcy.hpp"

namespace urbanpulse {

enum class Detector { ZScore, Iqr, Shesd };
enum class Direction { High, Low };

inline std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::ZScore: return "ZSCORE";
    case Detector::Iqr: return "IQR";
    case Detector::Shesd: return "SHESD";
  }
  return "?";
}

inline std::optional<Detector> parse_detector(std::string_view s) {
  if (s == "ZSCORE" || s == "zscore") return Detector::ZScore;
  if (s == "IQR" || s == "iqr") return Detector::Iqr;
  if (s == "SHESD" || s == "shesd") return Detector::Shesd;
  return std::nullopt;
}

inline std::string_view to_string(Direction d) { return d == Direction::High ? "HIGH" : "LOW"; }

struct AnomalyDecision {
  SeriesKey key;
  Date date;
  double score{0.0};
  bool is_anomaly{false};
  Detector detector{Detector::ZScore};
  Direction direction{Direction::Low};
};

/// Deterministic merge order: source, location, date, bin.
inline bool decision_order(const AnomalyDecision& a, const AnomalyDecision& b) {
  return std::tie(a.key.source, a.key.location_id, a.date, a.key.bin_of_day) <
         std::tie(b.key.source, b.key.location_id, b.date, b.key.bin_of_day);
}

inline void sort_decisions(std::vector<AnomalyDecision>& d) { std::stable_sort(d.begin(), d.end(), decision_order); }

/// Two-sided static threshold, inclusive: |z| >= threshold.
inline std::vector<AnomalyDecision> detect_zscore(const std::vector<ScoredObservation>& observations,
                                                  double threshold = 3.0) {
  std::vector<AnomalyDecision> out;
  out.reserve(observations.size());
  for (const auto& o : observations) {
    out.push_back({o.key, o.date, o.z, std::abs(o.z) >= threshold, Detector::ZScore,
                   o.z > 0.0 ? Direction::High : Direction::Low});
  }
  sort_decisions(out);
  return out;
}

/// Tukey fences with strict inequality. Score carries the z-score when the
/// model has one, else 0.
inline AnomalyDecision detect_iqr(const NormalcyModel& model, Date date, double value, double multiplier = 1.5) {
  const double lo = model.q1 - multiplier * model.iqr();
  const double hi = model.q3 + multiplier * model.iqr();
  AnomalyDecision d;
  d.key = model.key;
  d.date = date;
  d.detector = Detector::Iqr;
  d.is_anomaly = value < lo || value > hi;
  d.direction = value > model.median ? Direction::High : Direction::Low;
  d.score = model.scorable() ? (value - model.mean) / model.std : 0.0;
  return d;
}

inline std::vector<AnomalyDecision> detect_iqr(const SeriesMap& series, const ModelMap& models,
                                               double multiplier = 1.5) {
  std::vector<AnomalyDecision> out;
  for (const auto& [key, s] : series) {
    const auto it = models.find(key);
    if (it == models.end() || it->second.degenerate()) continue;
    for (const auto& sample : s.samples) out.push_back(detect_iqr(it->second, sample.date, sample.value, multiplier));
  }
  sort_decisions(out);
  return out;
}

struct ShesdReport {
  std::size_t series_run{0};
  std::size_t series_skipped{0};  // shorter than two periods
  std::size_t series_truncated{0};
};

/// Default season: one week of bins (5 weekdays or 2 weekend days).
inline std::size_t default_period(int bins_per_day, DayType daytype) {
  return static_cast<std::size_t>(bins_per_day) * (daytype == DayType::Weekday ? 5u : 2u);
}

/// S-H-ESD over each (source, location, daytype) z-score series ordered by
/// date then bin. Phases come from (date rank, bin) so gaps in BUS series do
/// not shift the seasonal alignment.
inline std::vector<AnomalyDecision> detect_shesd(const std::vector<ScoredObservation>& observations,
                                                 const std::map<Source, BinScheme>& schemes,
                                                 const EsdConfig& config, ShesdReport* report = nullptr) {
  config.validate();
  using GroupKey = std::tuple<Source, std::string, DayType>;
  std::map<GroupKey, std::vector<const ScoredObservation*>> groups;
  for (const auto& o : observations) groups[{o.key.source, o.key.location_id, o.key.daytype}].push_back(&o);

  ShesdReport local;
  std::vector<AnomalyDecision> out;
  out.reserve(observations.size());
  for (auto& [gk, members] : groups) {
    const auto& [source, location, daytype] = gk;
    const auto sit = schemes.find(source);
    if (sit == schemes.end()) throw ConfigError("no bin scheme for " + std::string(to_string(source)));
    const int bpd = sit->second.bins_per_day();
    std::sort(members.begin(), members.end(), [](const ScoredObservation* a, const ScoredObservation* b) {
      return std::tie(a->date, a->key.bin_of_day) < std::tie(b->date, b->key.bin_of_day);
    });
    const std::size_t period = config.period ? config.period : default_period(bpd, daytype);

    std::vector<double> x;
    std::vector<std::size_t> phase;
    std::size_t date_rank = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i > 0 && members[i]->date != members[i - 1]->date) ++date_rank;
      x.push_back(members[i]->z);
      phase.push_back((date_rank * static_cast<std::size_t>(bpd) + static_cast<std::size_t>(members[i]->key.bin_of_day)) %
                      period);
    }
    if (period < 2 || x.size() < 2 * period) {
      ++local.series_skipped;
      continue;
    }
    const auto res = shesd(x, phase, period, config);
    ++local.series_run;
    if (res.truncated) ++local.series_truncated;
    std::vector<bool> flagged(x.size(), false);
    for (auto i : res.anomalies) flagged[i] = true;
    for (std::size_t i = 0; i < members.size(); ++i) {
      out.push_back({members[i]->key, members[i]->date, members[i]->z, flagged[i], Detector::Shesd,
                     res.residual[i] > 0.0 ? Direction::High : Direction::Low});
    }
  }
  if (report) *report = local;
  sort_decisions(out);
  return out;
}

// Decision dump: `detector,source,location_id,date,bin_of_day,score,direction,is_anomaly`.

inline void write_decisions(std::ostream& out, const std::vector<AnomalyDecision>& decisions, bool anomalies_only) {
  csv::Writer w(out);
  w.row("detector", "source", "location_id", "date", "bin_of_day", "score", "direction", "is_anomaly");
  for (const auto& d : decisions) {
    if (anomalies_only && !d.is_anomaly) continue;
    w.row(to_string(d.detector), to_string(d.key.source), d.key.location_id, format_date(d.date), d.key.bin_of_day,
          d.score, to_string(d.direction), d.is_anomaly);
  }
}

inline std::vector<AnomalyDecision> read_decisions(std::istream& in) {
  std::vector<AnomalyDecision> out;
  csv::Reader r(in);
  std::vector<std::string> f;
  if (!r.next(f)) throw ParseError("decisions: missing header");
  csv::require_header(f, {"detector", "source", "location_id", "date", "bin_of_day", "score", "direction", "is_anomaly"},
                      "decisions");
  while (r.next(f)) {
    const auto where = " at line " + std::to_string(r.line_number());
    if (f.size() != 8) throw ParseError("decisions: bad row" + where);
    const auto det = parse_detector(f[0]);
    const auto src = parse_source_name(f[1]);
    const auto bin = csv::parse_int(f[4]);
    const auto score = csv::parse_double(f[5]);
    if (!det || !src || !bin || !score || (f[6] != "HIGH" && f[6] != "LOW") || (f[7] != "0" && f[7] != "1")) {
      throw ParseError("decisions: bad field" + where);
    }
    AnomalyDecision d;
    d.detector = *det;
    d.date = parse_date(f[3]);
    d.key = SeriesKey{*src, f[2], static_cast<int>(*bin), daytype_of(d.date)};
    d.score = *score;
    d.direction = f[6] == "HIGH" ? Direction::High : Direction::Low;
    d.is_anomaly = f[7] == "1";
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace urbanpulse

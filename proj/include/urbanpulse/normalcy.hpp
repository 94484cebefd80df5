#pragma once

// Baseline statistics per series key and z-score scoring.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "urbanpulse/ingest.hpp"

namespace urbanpulse {

/// Inclusive linear-interpolation quantile of sorted data (h = (n-1)p).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

struct NormalcyModel {
  SeriesKey key;
  std::size_t n{0};
  double mean{0.0};
  double std{0.0};  // sample (n-1) standard deviation
  double median{0.0};
  double q1{0.0};
  double q3{0.0};

  double iqr() const { return q3 - q1; }
  bool degenerate() const { return n < 2; }
  bool zero_variance() const { return !degenerate() && std == 0.0; }
  bool scorable() const { return !degenerate() && std > 0.0; }
};

using ModelMap = std::map<SeriesKey, NormalcyModel>;

inline NormalcyModel fit_samples(const SeriesKey& key, std::span<const double> values) {
  if (values.empty()) throw DomainError("cannot fit an empty series");
  NormalcyModel m;
  m.key = key;
  m.n = values.size();
  const double n = static_cast<double>(m.n);
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (m.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / (n - 1.0));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  m.median = quantile_sorted(sorted, 0.5);
  m.q1 = quantile_sorted(sorted, 0.25);
  m.q3 = quantile_sorted(sorted, 0.75);
  return m;
}

/// One model per series key. Dates in `excluded` (holidays) are left out of
/// the fit; a series with nothing left is skipped.
inline ModelMap fit(const SeriesMap& series, const std::set<Date>& excluded = {}) {
  ModelMap models;
  std::vector<double> values;
  for (const auto& [key, s] : series) {
    values.clear();
    for (const auto& sample : s.samples) {
      if (!excluded.contains(sample.date)) values.push_back(sample.value);
    }
    if (values.empty()) continue;
    models.emplace(key, fit_samples(key, values));
  }
  return models;
}

inline double z_score(const NormalcyModel& model, double value) {
  if (!model.scorable()) throw DomainError("z-score undefined for degenerate or zero-variance model");
  return (value - model.mean) / model.std;
}

struct ScoredObservation {
  SeriesKey key;
  Date date;
  double value{0.0};
  double z{0.0};
  double normalized_z{0.0};
};

struct ScoringResult {
  std::vector<ScoredObservation> observations;  // ordered by key then date
  std::size_t skipped_keys{0};                  // degenerate or zero variance
};

inline ScoringResult score_observations(const SeriesMap& series, const ModelMap& models) {
  ScoringResult out;
  for (const auto& [key, s] : series) {
    const auto it = models.find(key);
    if (it == models.end() || !it->second.scorable()) {
      ++out.skipped_keys;
      continue;
    }
    for (const auto& sample : s.samples) {
      out.observations.push_back({key, sample.date, sample.value, z_score(it->second, sample.value), 0.0});
    }
  }
  return out;
}

/// Per source: normalized_z = |z| / max |z| over that source's observations.
/// A source whose scores are all zero maps to zeros.
inline void normalize_scores(std::vector<ScoredObservation>& obs) {
  std::map<Source, double> max_abs;
  for (const auto& o : obs) {
    auto& m = max_abs[o.key.source];
    m = std::max(m, std::abs(o.z));
  }
  for (auto& o : obs) {
    const double m = max_abs[o.key.source];
    o.normalized_z = m > 0.0 ? std::abs(o.z) / m : 0.0;
  }
}

// Model dump: `source,location_id,bin_of_day,daytype,n,mean,std,median,q1,q3`.

inline void write_models(std::ostream& out, const ModelMap& models) {
  csv::Writer w(out);
  w.row("source", "location_id", "bin_of_day", "daytype", "n", "mean", "std", "median", "q1", "q3");
  for (const auto& [key, m] : models) {
    w.row(to_string(key.source), key.location_id, key.bin_of_day, to_string(key.daytype), m.n, m.mean, m.std,
          m.median, m.q1, m.q3);
  }
}

inline ModelMap read_models(std::istream& in) {
  ModelMap models;
  csv::Reader r(in);
  std::vector<std::string> f;
  if (!r.next(f)) throw ParseError("models.csv: missing header");
  csv::require_header(f, {"source", "location_id", "bin_of_day", "daytype", "n", "mean", "std", "median", "q1", "q3"},
                      "models.csv");
  while (r.next(f)) {
    const auto where = " at line " + std::to_string(r.line_number());
    if (f.size() != 10) throw ParseError("models.csv: bad row" + where);
    const auto src = parse_source_name(f[0]);
    const auto bin = csv::parse_int(f[2]);
    const auto dt = parse_daytype(f[3]);
    const auto n = csv::parse_int(f[4]);
    if (!src || !bin || !dt || !n || *n < 0) throw ParseError("models.csv: bad field" + where);
    NormalcyModel m;
    m.key = SeriesKey{*src, f[1], static_cast<int>(*bin), *dt};
    m.n = static_cast<std::size_t>(*n);
    double* dst[] = {&m.mean, &m.std, &m.median, &m.q1, &m.q3};
    for (int i = 0; i < 5; ++i) {
      const auto v = csv::parse_double(f[5 + i]);
      if (!v) throw ParseError("models.csv: bad number" + where);
      *dst[i] = *v;
    }
    models.emplace(m.key, m);
  }
  return models;
}

}  // namespace urbanpulse

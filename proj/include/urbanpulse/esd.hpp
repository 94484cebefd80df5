#pragma once

// Generalized extreme studentized deviate test and its seasonal hybrid
// variant (per-phase median decomposition + robust ESD on the residual).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "urbanpulse/error.hpp"
#include "urbanpulse/normalcy.hpp"

namespace urbanpulse {

inline constexpr double kMadToSigma = 1.4826;

/// Critical value for the k-th (1-based) removal out of n points.
inline double esd_critical_value(std::size_t n, std::size_t k, double alpha) {
  const double nk = static_cast<double>(n - k);
  const double p = 1.0 - alpha / (2.0 * static_cast<double>(n - k + 1));
  const boost::math::students_t_distribution<double> t_dist(nk - 1.0);
  const double t = boost::math::quantile(t_dist, p);
  return (nk * t) / std::sqrt((nk - 1.0 + t * t) * (nk + 1.0));
}

struct EsdResult {
  std::vector<std::size_t> anomalies;  // indices in removal order
  bool truncated{false};               // scale hit zero before max_anoms removals
};

/// Flags up to `max_anoms` outliers. Each round removes the point farthest
/// from the center in scale units (mean/sd, or median/1.4826*MAD when
/// robust); all points up to the last round whose statistic beats its
/// critical value are returned. A zero scale with a nonzero deviation counts
/// as an infinite statistic; a zero scale with nothing left to separate stops
/// the rounds and sets `truncated`.
inline EsdResult generalized_esd(std::span<const double> series, std::size_t max_anoms, double alpha,
                                 bool robust) {
  const std::size_t n = series.size();
  if (max_anoms == 0) return {};
  if (n < max_anoms + 2) throw DomainError("generalized ESD needs n >= max_anoms + 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");

  std::vector<std::size_t> alive(n);
  for (std::size_t i = 0; i < n; ++i) alive[i] = i;
  std::vector<double> work;
  std::vector<std::size_t> removed;
  std::size_t last_pass = 0;
  EsdResult result;

  for (std::size_t k = 1; k <= max_anoms; ++k) {
    work.clear();
    for (auto i : alive) work.push_back(series[i]);
    double center = 0.0, scale = 0.0;
    if (robust) {
      center = median_of(work);
      for (auto& v : work) v = std::abs(v - center);
      scale = kMadToSigma * median_of(work);
    } else {
      const double m = static_cast<double>(work.size());
      for (double v : work) center += v;
      center /= m;
      double ss = 0.0;
      for (double v : work) ss += (v - center) * (v - center);
      scale = std::sqrt(ss / (m - 1.0));
    }
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t j = 0; j < alive.size(); ++j) {
      const double dev = std::abs(series[alive[j]] - center);
      if (dev > best) {
        best = dev;
        arg = j;
      }
    }
    double stat = 0.0;
    if (scale > 0.0) {
      stat = best / scale;
    } else if (best > 0.0) {
      stat = std::numeric_limits<double>::infinity();
    } else {
      result.truncated = true;
      break;
    }
    removed.push_back(alive[arg]);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(arg));
    if (stat > esd_critical_value(n, k, alpha)) last_pass = k;
  }
  result.anomalies.assign(removed.begin(), removed.begin() + static_cast<std::ptrdiff_t>(last_pass));
  return result;
}

struct EsdConfig {
  double alpha{0.05};
  double max_anoms_fraction{0.02};
  std::size_t period{0};  // 0 = one week of bins for the series' daytype

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("ESD alpha must lie in (0, 1)");
    if (!(max_anoms_fraction > 0.0 && max_anoms_fraction <= 0.49)) {
      throw ConfigError("ESD max_anoms fraction must lie in (0, 0.49]");
    }
  }
};

inline std::size_t shesd_max_anoms(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
}

/// Seasonal residual: x - (per-phase median across periods) - median(x).
inline std::vector<double> seasonal_residual(std::span<const double> x, std::span<const std::size_t> phase,
                                             std::size_t period) {
  std::vector<std::vector<double>> by_phase(period);
  for (std::size_t i = 0; i < x.size(); ++i) by_phase[phase[i]].push_back(x[i]);
  std::vector<double> seasonal(period, 0.0);
  for (std::size_t p = 0; p < period; ++p) {
    if (!by_phase[p].empty()) seasonal[p] = median_of(std::move(by_phase[p]));
  }
  const double overall = median_of(std::vector<double>(x.begin(), x.end()));
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - seasonal[phase[i]] - overall;
  return r;
}

struct ShesdResult {
  std::vector<std::size_t> anomalies;  // ascending indices
  std::vector<double> residual;
  bool truncated{false};
};

/// S-H-ESD over one series with explicit phase labels in [0, period).
inline ShesdResult shesd(std::span<const double> x, std::span<const std::size_t> phase, std::size_t period,
                         const EsdConfig& config) {
  config.validate();
  if (period < 2) throw DomainError("S-H-ESD period must be >= 2");
  if (x.size() < 2 * period) throw DomainError("S-H-ESD needs at least two periods of data");
  ShesdResult out;
  out.residual = seasonal_residual(x, phase, period);
  const auto esd = generalized_esd(out.residual, shesd_max_anoms(x.size(), config.max_anoms_fraction),
                                   config.alpha, true);
  out.anomalies = esd.anomalies;
  out.truncated = esd.truncated;
  std::sort(out.anomalies.begin(), out.anomalies.end());
  return out;
}

/// Convenience form for a gap-free series: phase = index mod period.
inline ShesdResult shesd(std::span<const double> x, std::size_t period, const EsdConfig& config) {
  std::vector<std::size_t> phase(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) phase[i] = i % period;
  return shesd(x, phase, period, config);
}

}  // namespace urbanpulse

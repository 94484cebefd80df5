#pragma once

#include <array>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "urbanpulse/error.hpp"

namespace urbanpulse {

enum class Source { Cdr, Bus, TaxiPickup, TaxiDropoff, Checkin };

inline constexpr std::array<Source, 5> kAllSources{Source::Cdr, Source::Bus, Source::TaxiPickup,
                                                   Source::TaxiDropoff, Source::Checkin};

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::Cdr: return "CDR";
    case Source::Bus: return "BUS";
    case Source::TaxiPickup: return "TAXI_PICKUP";
    case Source::TaxiDropoff: return "TAXI_DROPOFF";
    case Source::Checkin: return "CHECKIN";
  }
  return "?";
}

inline std::optional<Source> parse_source_name(std::string_view s) {
  for (auto src : kAllSources) {
    if (to_string(src) == s) return src;
  }
  return std::nullopt;
}

/// Count-valued sources get zero-filled; BUS holds a mean loading level.
inline bool is_count_source(Source s) { return s != Source::Bus; }

// Hour boundaries of the five coarse daily bins: night, AM peak, off-peak,
// PM peak, late evening.
inline constexpr std::array<int, 6> kCoarseHourEdges{0, 7, 11, 18, 21, 24};
inline constexpr std::array<std::string_view, 5> kCoarseLabels{"00-07", "AM-Peak", "Off-Peak", "PM-Peak",
                                                               "21-24"};

/// How a day is cut into bins: fixed-width bins, or the five named coarse bins.
struct BinScheme {
  int width_minutes{60};
  bool coarse{false};

  friend bool operator==(const BinScheme&, const BinScheme&) = default;

  static BinScheme fixed(int width) {
    if (width <= 0 || 1440 % width != 0) {
      throw ConfigError("bin width " + std::to_string(width) + " does not divide 1440");
    }
    return BinScheme{width, false};
  }
  static BinScheme coarse5() { return BinScheme{0, true}; }

  int bins_per_day() const { return coarse ? 5 : 1440 / width_minutes; }

  /// [start, end) in minutes of day.
  std::pair<int, int> interval(int bin) const {
    if (coarse) return {kCoarseHourEdges[bin] * 60, kCoarseHourEdges[bin + 1] * 60};
    return {bin * width_minutes, (bin + 1) * width_minutes};
  }

  int bin_of_minute(int minute_of_day) const {
    if (coarse) {
      const int hour = minute_of_day / 60;
      for (int b = 0; b < 5; ++b) {
        if (hour < kCoarseHourEdges[b + 1]) return b;
      }
      return 4;
    }
    return minute_of_day / width_minutes;
  }

  std::string label(int bin) const {
    if (coarse) return std::string(kCoarseLabels[bin]);
    const auto [s, e] = interval(bin);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", s / 60, s % 60);
    return buf;
  }

  std::string to_string() const { return coarse ? "coarse5" : std::to_string(width_minutes); }

  static BinScheme parse(std::string_view s) {
    if (s == "coarse5") return coarse5();
    int w = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw ConfigError("bad bin scheme '" + std::string(s) + "'");
      w = w * 10 + (c - '0');
    }
    return fixed(w);
  }
};

}  // namespace urbanpulse

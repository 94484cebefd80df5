#pragma once

// Local civil time handling. All timestamps are treated as wall-clock time in
// one fixed-offset locale, so no time-zone database or DST logic is needed.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "urbanpulse/error.hpp"

namespace urbanpulse {

/// Calendar day, stored as days since 1970-01-01.
struct Date {
  std::int32_t days{0};

  friend constexpr auto operator<=>(const Date&, const Date&) = default;
};

/// Minute-resolution civil instant, minutes since 1970-01-01T00:00.
struct Instant {
  std::int64_t minutes{0};

  friend constexpr auto operator<=>(const Instant&, const Instant&) = default;

  constexpr Date date() const {
    auto d = minutes / 1440;
    if (minutes % 1440 < 0) --d;
    return Date{static_cast<std::int32_t>(d)};
  }
  constexpr int minute_of_day() const {
    auto m = static_cast<int>(minutes % 1440);
    return m < 0 ? m + 1440 : m;
  }
  constexpr Instant plus_minutes(std::int64_t m) const { return Instant{minutes + m}; }
};

enum class DayType { Weekday, Weekend };

inline std::string_view to_string(DayType d) {
  return d == DayType::Weekday ? "WEEKDAY" : "WEEKEND";
}

inline std::optional<DayType> parse_daytype(std::string_view s) {
  if (s == "WEEKDAY") return DayType::Weekday;
  if (s == "WEEKEND") return DayType::Weekend;
  return std::nullopt;
}

inline std::chrono::sys_days to_sys_days(Date d) {
  return std::chrono::sys_days{std::chrono::days{d.days}};
}

inline Date make_date(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ParseError("invalid calendar date");
  return Date{static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count())};
}

inline Instant make_instant(Date d, int hour, int minute) {
  return Instant{static_cast<std::int64_t>(d.days) * 1440 + hour * 60 + minute};
}

/// 0 = Sunday .. 6 = Saturday
inline unsigned weekday_index(Date d) {
  return std::chrono::weekday{to_sys_days(d)}.c_encoding();
}

inline DayType daytype_of(Date d) {
  const auto w = weekday_index(d);
  return (w == 0 || w == 6) ? DayType::Weekend : DayType::Weekday;
}

inline int month_of(Date d) {
  return static_cast<int>(static_cast<unsigned>(std::chrono::year_month_day{to_sys_days(d)}.month()));
}

inline int year_of(Date d) {
  return static_cast<int>(std::chrono::year_month_day{to_sys_days(d)}.year());
}

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

/// Parses YYYY-MM-DD.
inline Date parse_date(std::string_view s) {
  int y = 0, m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !detail::parse_fixed(s, 0, 4, y) ||
      !detail::parse_fixed(s, 5, 2, m) || !detail::parse_fixed(s, 8, 2, d)) {
    throw ParseError("bad date '" + std::string(s) + "'");
  }
  return make_date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

/// Parses YYYY-MM-DDTHH:MM[:SS] (a space separator is also accepted). Seconds
/// are truncated; offsets are rejected since inputs are local time.
inline Instant parse_instant(std::string_view s) {
  if (s.size() != 16 && s.size() != 19) throw ParseError("bad timestamp '" + std::string(s) + "'");
  if (s[10] != 'T' && s[10] != ' ') throw ParseError("bad timestamp '" + std::string(s) + "'");
  const Date d = parse_date(s.substr(0, 10));
  int hh = 0, mm = 0, ss = 0;
  bool ok = detail::parse_fixed(s, 11, 2, hh) && s[13] == ':' && detail::parse_fixed(s, 14, 2, mm);
  if (ok && s.size() == 19) ok = s[16] == ':' && detail::parse_fixed(s, 17, 2, ss);
  if (!ok || hh > 23 || mm > 59 || ss > 59) throw ParseError("bad timestamp '" + std::string(s) + "'");
  return make_instant(d, hh, mm);
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{to_sys_days(d)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_instant(Instant t) {
  const int mod = t.minute_of_day();
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", mod / 60, mod % 60);
  return format_date(t.date()) + "T" + buf + ":00";
}

}  // namespace urbanpulse

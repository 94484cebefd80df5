#pragma once

// Minimal RFC 4180-style CSV reading and writing. Enough for the flat record
// files this project exchanges; no multi-line quoted fields.

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "urbanpulse/error.hpp"

namespace urbanpulse::csv {

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

/// Reads lines, stripping a trailing '\r' and a UTF-8 BOM on the first line.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (line.empty()) continue;
      fields = split_line(line);
      return true;
    }
    return false;
  }

  std::size_t line_number() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_{0};
};

inline std::string escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (s.empty()) return std::nullopt;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  if (s.empty()) return std::nullopt;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((emit(fields, first)), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) emit(f, first);
    out_ << '\n';
  }

 private:
  void sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }
  void emit(std::string_view s, bool& first) {
    sep(first);
    out_ << escape(s);
  }
  void emit(const std::string& s, bool& first) { emit(std::string_view(s), first); }
  void emit(const char* s, bool& first) { emit(std::string_view(s), first); }
  void emit(double v, bool& first) {
    sep(first);
    out_ << format_double(v);
  }
  void emit(bool v, bool& first) {
    sep(first);
    out_ << (v ? "1" : "0");
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void emit(Int v, bool& first) {
    sep(first);
    out_ << v;
  }

  std::ostream& out_;
};

/// Throws ParseError unless the header equals `expected` exactly.
inline void require_header(const std::vector<std::string>& got, const std::vector<std::string>& expected,
                           std::string_view file_label) {
  if (got != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw ParseError(std::string(file_label) + ": header must be '" + want + "'");
  }
}

}  // namespace urbanpulse::csv

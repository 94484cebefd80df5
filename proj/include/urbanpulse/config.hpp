#pragma once

// Pipeline settings and their YAML form.

#include <map>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "urbanpulse/bins.hpp"
#include "urbanpulse/esd.hpp"
#include "urbanpulse/evaluate.hpp"
#include "urbanpulse/fuse.hpp"
#include "urbanpulse/ingest.hpp"

namespace urbanpulse {

struct PipelineConfig {
  OccupancyConfig occupancy;
  bool coarse_bins{false};  // rebin hourly occupancy into the five named bins

  double z_threshold{3.0};
  double iqr_multiplier{1.5};
  EsdConfig esd;

  std::vector<Source> enabled{Source::Cdr, Source::Bus, Source::Checkin};
  FusionMethod fusion_method{FusionMethod::Majority};
  double score_threshold{0.8};
  int k{2};
  std::map<Source, double> weights;

  std::vector<double> radii{default_radius_grid()};
  int offset_hours{0};
  int granger_lag{1};
  int granger_bin_minutes{60};
  int top_k{10};
  std::uint64_t seed{7};

  FusionPolicy policy() const {
    switch (fusion_method) {
      case FusionMethod::Mean: return FusionPolicy::mean(score_threshold);
      case FusionMethod::Weighted: return FusionPolicy::weighted(weights, score_threshold);
      case FusionMethod::Majority: break;
    }
    return FusionPolicy::majority(score_threshold, k, static_cast<int>(enabled.size()));
  }

  void validate() const {
    if (!(z_threshold > 0.0)) throw ConfigError("z threshold must be positive");
    if (!(iqr_multiplier > 0.0)) throw ConfigError("IQR multiplier must be positive");
    esd.validate();
    if (enabled.empty()) throw ConfigError("no sources enabled");
    if (coarse_bins && occupancy.bin_minutes != 60) throw ConfigError("coarse bins need 60-minute base bins");
    if (granger_lag < 1) throw ConfigError("Granger lag must be >= 1");
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
    BinScheme::fixed(occupancy.bin_minutes);
    BinScheme::fixed(granger_bin_minutes);
  }
};

inline Source require_source(const std::string& s) {
  const auto src = parse_source_name(s);
  if (!src) throw ConfigError("unknown source '" + s + "'");
  return *src;
}

inline std::vector<Source> parse_source_list(const std::string& csv_list) {
  std::vector<Source> out;
  std::size_t pos = 0;
  while (pos <= csv_list.size()) {
    const auto comma = csv_list.find(',', pos);
    const auto tok = csv_list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(require_source(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

namespace detail {

template <typename T>
void read_scalar(const YAML::Node& node, const char* key, T& dst, const std::string& where) {
  if (!node[key]) return;
  try {
    dst = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": bad value");
  }
}

inline void check_keys(const YAML::Node& node, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
  }
}

}  // namespace detail

/// Applies a YAML document on top of `base`. Unknown keys are rejected.
inline PipelineConfig apply_yaml(PipelineConfig cfg, const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (root.IsNull()) return cfg;
  detail::check_keys(root, {"seed", "bins", "holidays", "detect", "fusion", "eval", "granger", "annotate"}, "config");
  detail::read_scalar(root, "seed", cfg.seed, "config");
  if (const auto b = root["bins"]) {
    detail::check_keys(b, {"cdr_minutes", "minutes", "coarse"}, "bins");
    detail::read_scalar(b, "cdr_minutes", cfg.occupancy.cdr_bin_minutes, "bins");
    detail::read_scalar(b, "minutes", cfg.occupancy.bin_minutes, "bins");
    detail::read_scalar(b, "coarse", cfg.coarse_bins, "bins");
  }
  if (const auto h = root["holidays"]) {
    if (!h.IsSequence()) throw ConfigError("holidays: expected a list of dates");
    for (const auto& d : h) {
      try {
        cfg.occupancy.calendar.holidays.insert(parse_date(d.as<std::string>()));
      } catch (const ParseError& e) {
        throw ConfigError(std::string("holidays: ") + e.what());
      }
    }
  }
  if (const auto d = root["detect"]) {
    detail::check_keys(d, {"z_threshold", "iqr_multiplier", "esd_alpha", "esd_max_anoms", "esd_period"}, "detect");
    detail::read_scalar(d, "z_threshold", cfg.z_threshold, "detect");
    detail::read_scalar(d, "iqr_multiplier", cfg.iqr_multiplier, "detect");
    detail::read_scalar(d, "esd_alpha", cfg.esd.alpha, "detect");
    detail::read_scalar(d, "esd_max_anoms", cfg.esd.max_anoms_fraction, "detect");
    detail::read_scalar(d, "esd_period", cfg.esd.period, "detect");
  }
  if (const auto f = root["fusion"]) {
    detail::check_keys(f, {"method", "S", "k", "weights", "sources"}, "fusion");
    if (f["method"]) {
      const auto m = parse_fusion_method(f["method"].as<std::string>());
      if (!m) throw ConfigError("fusion.method: expected weighted, mean or majority");
      cfg.fusion_method = *m;
    }
    detail::read_scalar(f, "S", cfg.score_threshold, "fusion");
    detail::read_scalar(f, "k", cfg.k, "fusion");
    if (const auto s = f["sources"]) {
      if (!s.IsSequence()) throw ConfigError("fusion.sources: expected a list");
      cfg.enabled.clear();
      for (const auto& v : s) cfg.enabled.push_back(require_source(v.as<std::string>()));
    }
    if (const auto w = f["weights"]) {
      if (!w.IsMap()) throw ConfigError("fusion.weights: expected source: weight pairs");
      cfg.weights.clear();
      for (const auto& kv : w) cfg.weights[require_source(kv.first.as<std::string>())] = kv.second.as<double>();
    }
  }
  if (const auto e = root["eval"]) {
    detail::check_keys(e, {"R", "offset"}, "eval");
    if (e["R"]) cfg.radii = parse_radius_grid(e["R"].as<std::string>());
    detail::read_scalar(e, "offset", cfg.offset_hours, "eval");
  }
  if (const auto g = root["granger"]) {
    detail::check_keys(g, {"lag", "bin_minutes"}, "granger");
    detail::read_scalar(g, "lag", cfg.granger_lag, "granger");
    detail::read_scalar(g, "bin_minutes", cfg.granger_bin_minutes, "granger");
  }
  if (const auto a = root["annotate"]) {
    detail::check_keys(a, {"top_k"}, "annotate");
    detail::read_scalar(a, "top_k", cfg.top_k, "annotate");
  }
  cfg.validate();
  return cfg;
}

}  // namespace urbanpulse

// urbanpulse command line: simulate, ingest, fit, detect, fuse, eval, sweep,
// granger, normality, annotate, serve.

#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "urbanpulse/pipeline.hpp"
#include "urbanpulse/server.hpp"
#include "urbanpulse/simulate.hpp"

namespace fs = std::filesystem;
using namespace urbanpulse;

namespace {

urbanpulse::serve::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto v = csv::parse_double(tok);
    if (!v) throw ConfigError("bad number '" + tok + "'");
    out.push_back(*v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::map<Source, double> parse_weights(const std::string& s) {
  std::map<Source, double> w;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("weights must look like CDR=0.8,BUS=0.1");
    const auto v = csv::parse_double(tok.substr(eq + 1));
    if (!v) throw ConfigError("bad weight in '" + tok + "'");
    w[require_source(tok.substr(0, eq))] = *v;
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return w;
}

void print_curves(const std::vector<RecallCurve>& curves) {
  for (const auto& c : curves) {
    std::cout << c.label << " offset " << c.offset_hours << "h (" << c.eligible << " events):";
    for (const auto& p : c.points) std::cout << ' ' << p.radius_m << "m=" << p.recall;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"urbanpulse: multi-source urban anomaly detection"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  std::string data_dir = ".";
  app.add_option("--config", config_path, "YAML settings file")->check(CLI::ExistingFile);
  app.add_option("--data-dir,-d", data_dir, "directory with raw feeds and artifacts");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic city");
  std::string scenario = "concert-large";
  std::string sim_out;
  std::optional<std::uint64_t> sim_seed;
  bool list_scenarios = false;
  sim->add_option("--scenario", scenario, "scenario name");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out,-o", sim_out, "output directory (defaults to --data-dir)");
  sim->add_flag("--list", list_scenarios, "list scenarios and exit");

  auto* ingest = app.add_subcommand("ingest", "raw feeds -> occupancy.csv, bins.csv");
  std::optional<int> bin_minutes;
  bool coarse = false;
  ingest->add_option("--bin-minutes", bin_minutes, "bin width for BUS, taxi and check-in channels");
  ingest->add_flag("--coarse", coarse, "rebin hourly occupancy into the five named bins");

  auto* fitc = app.add_subcommand("fit", "occupancy -> models.csv");

  auto* detect = app.add_subcommand("detect", "models + occupancy -> decisions_<method>.csv");
  std::string detect_method = "zscore";
  std::optional<double> threshold, iqr_mult, alpha, max_anoms;
  std::optional<std::size_t> esd_period;
  bool include_normal = false;
  detect->add_option("--method", detect_method, "zscore | iqr | shesd")
      ->check(CLI::IsMember({"zscore", "iqr", "shesd", "ZSCORE", "IQR", "SHESD"}));
  detect->add_option("--threshold", threshold, "z-score threshold (default 3)");
  detect->add_option("--iqr-multiplier", iqr_mult, "IQR fence multiplier (default 1.5)");
  detect->add_option("--alpha", alpha, "ESD significance (default 0.05)");
  detect->add_option("--max-anoms", max_anoms, "ESD anomaly cap as a fraction (default 0.02)");
  detect->add_option("--period", esd_period, "S-H-ESD season length in bins");
  detect->add_flag("--include-normal", include_normal, "also write non-anomalous decisions");

  auto* fusec = app.add_subcommand("fuse", "normalized scores -> fused_<method>.csv");
  std::optional<std::string> fuse_method, weights, sources;
  std::optional<double> fuse_s;
  std::optional<int> fuse_k;
  fusec->add_option("--method", fuse_method, "weighted | mean | majority");
  fusec->add_option("--S", fuse_s, "score threshold on normalized scores");
  fusec->add_option("--k", fuse_k, "votes needed for majority");
  fusec->add_option("--weights", weights, "e.g. CDR=0.8,BUS=0.1,CHECKIN=0.1");
  fusec->add_option("--sources", sources, "enabled sources, e.g. CDR,BUS,CHECKIN");
  fusec->add_flag("--include-normal", include_normal, "also write non-anomalous cells");

  auto* evalc = app.add_subcommand("eval", "decisions + events -> recall.csv");
  std::string eval_detector = "zscore";
  std::optional<std::string> radius_spec;
  std::optional<int> offset;
  evalc->add_option("--detector", eval_detector, "decisions to evaluate");
  evalc->add_option("--R", radius_spec, "radius grid lo:hi:step in meters (default 0:4000:250)");
  evalc->add_option("--offset", offset, "hours relative to the event start hour (0 or -1)");
  evalc->add_option("--method", fuse_method, "fusion method whose fused file is evaluated");
  evalc->add_option("--sources", sources, "enabled sources");

  auto* sweepc = app.add_subcommand("sweep", "recall over R x S for single sources and fusion");
  std::string s_grid = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  sweepc->add_option("--R", radius_spec, "radius grid lo:hi:step");
  sweepc->add_option("--S", s_grid, "comma-separated score thresholds");
  sweepc->add_option("--offset", offset, "hour offset");
  sweepc->add_option("--k", fuse_k, "votes needed for majority");
  sweepc->add_option("--weights", weights, "weights for the WEIGHTED entry");
  sweepc->add_option("--sources", sources, "enabled sources");

  auto* grangerc = app.add_subcommand("granger", "pairwise Granger tests per zone");
  std::optional<int> lag, granger_bin;
  grangerc->add_option("--lag", lag, "lag in bins (default 1)");
  grangerc->add_option("--bin-minutes", granger_bin, "series resolution (default 60)");
  grangerc->add_option("--sources", sources, "sources to compare");

  auto* normc = app.add_subcommand("normality", "Shapiro-Wilk per source, location and hour");

  auto* annc = app.add_subcommand("annotate", "top TF-IDF terms for one cell");
  std::string ann_zone, ann_date;
  int ann_bin = 0;
  std::optional<int> ann_k;
  annc->add_option("--zone", ann_zone, "zone id")->required();
  annc->add_option("--date", ann_date, "YYYY-MM-DD")->required();
  annc->add_option("--bin", ann_bin, "bin of day on the fused grid")->required();
  annc->add_option("--k", ann_k, "number of terms");
  annc->add_option("--sources", sources, "enabled sources (sets the bin grid)");

  auto* servec = app.add_subcommand("serve", "HTTP/JSON API over the artifacts in --data-dir");
  int port = 8080;
  std::string host = "127.0.0.1";
  servec->add_option("--port", port, "listen port");
  servec->add_option("--host", host, "listen address");
  servec->add_option("--sources", sources, "initially enabled sources");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const fs::path dir = data_dir;
  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = apply_yaml(cfg, pipeline::read_file(config_path));
    if (bin_minutes) cfg.occupancy.bin_minutes = *bin_minutes;
    if (coarse) {
      cfg.coarse_bins = true;
      cfg.occupancy.bin_minutes = 60;
    }
    if (threshold) cfg.z_threshold = *threshold;
    if (iqr_mult) cfg.iqr_multiplier = *iqr_mult;
    if (alpha) cfg.esd.alpha = *alpha;
    if (max_anoms) cfg.esd.max_anoms_fraction = *max_anoms;
    if (esd_period) cfg.esd.period = *esd_period;
    if (fuse_method) {
      const auto m = parse_fusion_method(*fuse_method);
      if (!m) throw ConfigError("unknown fusion method '" + *fuse_method + "'");
      cfg.fusion_method = *m;
    }
    if (fuse_s) cfg.score_threshold = *fuse_s;
    if (fuse_k) cfg.k = *fuse_k;
    if (weights) cfg.weights = parse_weights(*weights);
    if (sources) cfg.enabled = parse_source_list(*sources);
    if (radius_spec) cfg.radii = parse_radius_grid(*radius_spec);
    if (offset) cfg.offset_hours = *offset;
    if (lag) cfg.granger_lag = *lag;
    if (granger_bin) cfg.granger_bin_minutes = *granger_bin;
    if (ann_k) cfg.top_k = *ann_k;
    if (sim_seed) cfg.seed = *sim_seed;
    cfg.validate();

    if (sim->parsed()) {
      const auto library = sim::scenario_library(cfg.seed);
      if (list_scenarios) {
        for (const auto& [name, c] : library) std::cout << name << " (" << c.events.size() << " events)\n";
        return 0;
      }
      const auto it = library.find(scenario);
      if (it == library.end()) throw ConfigError("unknown scenario '" + scenario + "'");
      const fs::path out = sim_out.empty() ? dir : fs::path(sim_out);
      const auto generated = sim::generate(it->second);
      const auto files = sim::write_output(generated, out, scenario);
      std::cout << "wrote " << files.size() << " files to " << out.string() << " (config sha256 "
                << generated.config_sha256 << ")\n";
    } else if (ingest->parsed()) {
      const auto report = pipeline::stage_ingest(dir, cfg);
      std::cout << "occupancy written; taxi points outside zones: "
                << report.taxi_pickup_outside + report.taxi_dropoff_outside
                << ", check-ins outside: " << report.checkin_outside
                << ", check-in definition: " << report.checkin_definition << '\n';
    } else if (fitc->parsed()) {
      const auto models = pipeline::stage_fit(dir, cfg);
      std::size_t unscorable = 0;
      for (const auto& [k, m] : models) unscorable += m.scorable() ? 0 : 1;
      std::cout << models.size() << " models (" << unscorable << " degenerate or zero-variance)\n";
    } else if (detect->parsed()) {
      const auto det = parse_detector(detect_method);
      const auto decisions = pipeline::stage_detect(dir, cfg, *det, include_normal);
      const auto n = std::count_if(decisions.begin(), decisions.end(), [](const auto& d) { return d.is_anomaly; });
      std::cout << n << " anomalies of " << decisions.size() << " decisions -> "
                << pipeline::decisions_file(*det) << '\n';
    } else if (fusec->parsed()) {
      const auto fused = pipeline::stage_fuse(dir, cfg, include_normal);
      const auto n = std::count_if(fused.begin(), fused.end(), [](const auto& d) { return d.is_anomaly; });
      std::cout << n << " anomalous cells of " << fused.size() << " -> " << pipeline::fused_file(cfg.fusion_method)
                << '\n';
    } else if (evalc->parsed()) {
      const auto det = parse_detector(eval_detector);
      if (!det) throw ConfigError("unknown detector '" + eval_detector + "'");
      print_curves(pipeline::stage_eval(dir, cfg, *det));
    } else if (sweepc->parsed()) {
      const auto cells = pipeline::stage_sweep(dir, cfg, parse_number_list(s_grid));
      std::cout << cells.size() << " sweep cells -> sweep.csv\n";
    } else if (grangerc->parsed()) {
      const auto run = pipeline::stage_granger(dir, cfg);
      for (const auto& s : summarize_granger(run.results)) {
        std::cout << s.x_label << " -> " << s.y_label << ": mean p " << s.mean_p << " (sd " << s.std_p << ", "
                  << s.count << " zones)\n";
      }
      if (!run.failed.empty()) std::cout << run.failed.size() << " pairs skipped (degenerate or gappy series)\n";
    } else if (normc->parsed()) {
      const auto rows = pipeline::stage_normality(dir, cfg);
      const auto rejected = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.p < 0.05; });
      std::cout << rows.size() << " series tested, " << rejected << " rejected at 0.05 -> normality.csv\n";
    } else if (annc->parsed()) {
      const auto data = pipeline::load_data(dir);
      const auto table = pipeline::load_table(dir);
      const auto corpus =
          build_docs(data.messages, data.raw.checkins, data.zones, pipeline::annotation_scheme(table, cfg));
      const CellKey cell{ann_zone, parse_date(ann_date), ann_bin};
      nlohmann::json out = {{"zone_id", ann_zone}, {"date", ann_date}, {"bin_of_day", ann_bin}};
      out["terms"] = corpus.find(cell) ? to_json(tfidf_top_k(corpus, cell, cfg.top_k)) : nlohmann::json::array();
      pipeline::write_file(dir / "annotations.json", out.dump(2) + "\n");
      std::cout << out.dump(2) << '\n';
    } else if (servec->parsed()) {
      serve::Server server(serve::load_snapshot(dir, cfg));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << dir.string() << " on http://" << host << ':' << port << std::endl;
      if (!server.listen(host, port)) throw std::runtime_error("cannot listen on port " + std::to_string(port));
    }
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const auto report = dir / "error_report.json";
    std::ofstream(report) << nlohmann::json{{"error", e.what()}, {"argv", std::vector<std::string>(argv, argv + argc)}}
                                 .dump(2)
                          << '\n';
    std::cerr << "error: " << e.what() << " (report: " << report.string() << ")\n";
    return 1;
  }
  return 0;
}

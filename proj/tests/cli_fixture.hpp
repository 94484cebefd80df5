#pragma once

// Runs the command-line tool and shares one simulated dataset per process.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "oracles.hpp"

namespace cli {

struct Run {
  int status{-1};
  std::string out;
};

inline Run run(const std::string& args) {
  static const auto log = oracle::scratch_dir("cli_log") / "stdout.txt";
  const std::string cmd = std::string(URBANPULSE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// concert-large, seed 7, taken through ingest, fit, detect and fuse.
inline const std::filesystem::path& concert_dir() {
  static const std::filesystem::path dir = [] {
    const auto d = oracle::scratch_dir("concert");
    const std::string dd = "-d " + d.string() + " ";
    for (const std::string step : {"simulate --scenario concert-large --seed 7", "ingest", "fit",
                                   "detect --method zscore", "fuse --method majority"}) {
      const auto r = run(dd + step);
      if (r.status != 0) throw std::runtime_error("fixture step failed: " + step + "\n" + r.out);
    }
    return d;
  }();
  return dir;
}

}  // namespace cli

#pragma once

// Pairwise Granger-causality F-tests between occupancy series.

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "urbanpulse/csv.hpp"
#include "urbanpulse/error.hpp"

namespace urbanpulse {

struct GrangerResult {
  std::string group;  // e.g. the zone the series belong to
  std::string x_label;
  std::string y_label;
  int lag{1};
  double f_statistic{0.0};
  double p_value{1.0};
  std::size_t n_effective{0};
  double rss_restricted{0.0};
  double rss_unrestricted{0.0};
};

namespace detail {

inline bool is_constant(std::span<const double> v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

// Residual sum of squares of an OLS fit; throws on a rank-deficient design.
inline double ols_rss(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) throw DomainError("degenerate regression: design matrix is singular");
  const Eigen::VectorXd beta = qr.solve(y);
  return (y - design * beta).squaredNorm();
}

}  // namespace detail

/// Does x help predict y? Compares y_t ~ 1 + y_{t-1..t-lag} against the same
/// model plus x_{t-1..t-lag}; p from F(lag, n_eff - 2 lag - 1).
inline GrangerResult granger_test(std::span<const double> x, std::span<const double> y, int lag,
                                  std::string x_label = "x", std::string y_label = "y") {
  if (lag < 1) throw DomainError("Granger lag must be >= 1");
  if (x.size() != y.size()) throw DomainError("Granger series lengths differ");
  const std::size_t n = x.size();
  const auto L = static_cast<std::size_t>(lag);
  if (n <= 3 * L + 2) throw DomainError("Granger test needs n > 3*lag + 2");
  if (detail::is_constant(x) || detail::is_constant(y)) {
    throw DomainError("degenerate regression: constant input series");
  }
  const std::size_t n_eff = n - L;
  Eigen::VectorXd target(n_eff);
  Eigen::MatrixXd restricted(n_eff, 1 + L);
  Eigen::MatrixXd full(n_eff, 1 + 2 * L);
  for (std::size_t t = L; t < n; ++t) {
    const auto row = static_cast<Eigen::Index>(t - L);
    target(row) = y[t];
    restricted(row, 0) = 1.0;
    full(row, 0) = 1.0;
    for (std::size_t j = 1; j <= L; ++j) {
      restricted(row, static_cast<Eigen::Index>(j)) = y[t - j];
      full(row, static_cast<Eigen::Index>(j)) = y[t - j];
      full(row, static_cast<Eigen::Index>(L + j)) = x[t - j];
    }
  }
  GrangerResult r;
  r.x_label = std::move(x_label);
  r.y_label = std::move(y_label);
  r.lag = lag;
  r.n_effective = n_eff;
  r.rss_restricted = detail::ols_rss(restricted, target);
  r.rss_unrestricted = detail::ols_rss(full, target);
  const double df2 = static_cast<double>(n_eff) - 2.0 * lag - 1.0;
  if (!(r.rss_unrestricted > 0.0)) throw DomainError("degenerate regression: perfect fit");
  r.f_statistic = std::max(0.0, ((r.rss_restricted - r.rss_unrestricted) / lag) / (r.rss_unrestricted / df2));
  const boost::math::fisher_f_distribution<double> f_dist(lag, df2);
  r.p_value = boost::math::cdf(boost::math::complement(f_dist, r.f_statistic));
  return r;
}

struct PairwiseGranger {
  std::vector<GrangerResult> results;
  std::vector<std::pair<std::string, std::string>> failed;  // (x, y) pairs that errored
};

/// Every ordered pair x -> y, x != y, of the labelled series.
inline PairwiseGranger pairwise_granger(const std::map<std::string, std::vector<double>>& series, int lag) {
  if (series.size() < 2) throw DomainError("pairwise Granger needs at least two sources");
  PairwiseGranger out;
  for (const auto& [xl, xs] : series) {
    for (const auto& [yl, ys] : series) {
      if (xl == yl) continue;
      try {
        out.results.push_back(granger_test(xs, ys, lag, xl, yl));
      } catch (const DomainError&) {
        out.failed.emplace_back(xl, yl);
      }
    }
  }
  return out;
}

struct GrangerSummary {
  std::string x_label;
  std::string y_label;
  double mean_p{0.0};
  double std_p{0.0};
  std::size_t count{0};
};

/// Mean and sample standard deviation of p-values per ordered pair across
/// zones.
inline std::vector<GrangerSummary> summarize_granger(const std::vector<GrangerResult>& results) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> by_pair;
  for (const auto& r : results) by_pair[{r.x_label, r.y_label}].push_back(r.p_value);
  std::vector<GrangerSummary> out;
  for (const auto& [pair, ps] : by_pair) {
    GrangerSummary s{pair.first, pair.second, 0.0, 0.0, ps.size()};
    for (double p : ps) s.mean_p += p;
    s.mean_p /= static_cast<double>(ps.size());
    if (ps.size() > 1) {
      double ss = 0.0;
      for (double p : ps) ss += (p - s.mean_p) * (p - s.mean_p);
      s.std_p = std::sqrt(ss / static_cast<double>(ps.size() - 1));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_granger(std::ostream& out, const std::vector<GrangerResult>& results) {
  csv::Writer w(out);
  w.row("group", "x", "y", "lag", "f", "p", "n_effective");
  for (const auto& r : results) w.row(r.group, r.x_label, r.y_label, r.lag, r.f_statistic, r.p_value, r.n_effective);
}

inline void write_granger_summary(std::ostream& out, const std::vector<GrangerSummary>& rows) {
  csv::Writer w(out);
  w.row("x", "y", "mean_p", "std_p", "count");
  for (const auto& r : rows) w.row(r.x_label, r.y_label, r.mean_p, r.std_p, r.count);
}

}  // namespace urbanpulse

#pragma once

// Shapiro-Wilk W test with Royston's (1992, 1995) coefficient approximation
// and normalizing transformation of W, valid for 3 <= n <= 5000.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "urbanpulse/error.hpp"

namespace urbanpulse {

struct ShapiroWilkResult {
  double w{1.0};
  double p_value{1.0};
};

namespace detail {

template <std::size_t N>
double poly(const std::array<double, N>& c, double x) {
  double r = 0.0;
  for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace detail

inline ShapiroWilkResult shapiro_wilk(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 3 || n > 5000) throw DomainError("Shapiro-Wilk supports 3 <= n <= 5000");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  if (!(x.back() - x.front() > 0.0)) throw DomainError("Shapiro-Wilk: zero variance");

  const boost::math::normal_distribution<double> std_normal;
  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;

  // Coefficients a_1..a_half for the upper tail (antisymmetric below).
  std::vector<double> a(half, 0.0);
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2.0;
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = -boost::math::quantile(std_normal, (static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    constexpr std::array<double, 6> c1{0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    constexpr std::array<double, 6> c2{0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    const double a1 = detail::poly(c1, rsn) + m[0] / ssumm2;
    std::size_t first_plain = 1;
    double fac = 0.0;
    if (n > 5) {
      const double a2 = m[1] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
      first_plain = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_plain; i < half; ++i) a[i] = m[i] / fac;
  }

  const double mean = [&] {
    double s = 0.0;
    for (double v : x) s += v;
    return s / an;
  }();
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double b = 0.0;
  for (std::size_t i = 0; i < half; ++i) b += a[i] * (x[n - 1 - i] - x[i]);
  double w = (b * b) / ssq;
  w = std::min(w, 1.0);

  ShapiroWilkResult res;
  res.w = w;
  if (n == 3) {
    constexpr double six_over_pi = 6.0 / std::numbers::pi;
    constexpr double stqr = std::numbers::pi / 3.0;  // asin(sqrt(3/4))
    res.p_value = std::clamp(six_over_pi * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return res;
  }

  double y = std::log1p(-w);
  double mu = 0.0, sigma = 1.0;
  if (n <= 11) {
    const double gamma = -2.273 + 0.459 * an;
    if (y >= gamma) {
      res.p_value = 1e-99;
      return res;
    }
    y = -std::log(gamma - y);
    constexpr std::array<double, 4> c3{0.5440, -0.39978, 0.025054, -6.714e-4};
    constexpr std::array<double, 4> c4{1.3822, -0.77857, 0.062767, -0.0020322};
    mu = detail::poly(c3, an);
    sigma = std::exp(detail::poly(c4, an));
  } else {
    const double ln_n = std::log(an);
    constexpr std::array<double, 4> c5{-1.5861, -0.31082, -0.083751, 0.0038915};
    constexpr std::array<double, 3> c6{-0.4803, -0.082676, 0.0030302};
    mu = detail::poly(c5, ln_n);
    sigma = std::exp(detail::poly(c6, ln_n));
  }
  const boost::math::normal_distribution<double> dist(mu, sigma);
  res.p_value = boost::math::cdf(boost::math::complement(dist, y));
  return res;
}

}  // namespace urbanpulse

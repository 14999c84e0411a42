#pragma once

// Least-squares line through (log x, log y).

#include <cmath>
#include <vector>

#include "tclp/errors.hpp"

namespace tclp {

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

inline LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_loglog: need at least two paired points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error("fit_loglog: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    sx += lx.back();
    sy += ly.back();
    sxx += lx.back() * lx.back();
    sxy += lx.back() * ly.back();
  }
  LogLogFit f;
  f.points = x.size();
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw Error("fit_loglog: abscissae coincide");
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  const double mean = sy / n;
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    ss_tot += (ly[i] - mean) * (ly[i] - mean);
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ss_res += r * r;
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

/// n points geometrically spaced on [a, b].
inline std::vector<double> geometric_grid(double a, double b, std::size_t n) {
  if (n < 2) return {a};
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = a * std::pow(b / a, static_cast<double>(i) / static_cast<double>(n - 1));
  g.back() = b;
  return g;
}

}  // namespace tclp

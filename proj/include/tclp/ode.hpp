#pragma once

// Adaptive Dormand–Prince 5(4) integrator for Eigen vector states.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tclp/errors.hpp"

namespace tclp {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  /// 0 selects the initial step automatically.
  double initial_step = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  /// Steps below min_step_factor * max(1, |t|) raise StepUnderflow.
  double min_step_factor = 1e-14;
  std::size_t max_steps = 20'000'000;
};

template <class Vec>
class Dopri5 {
 public:
  using Rhs = std::function<Vec(double, const Vec&)>;

  Dopri5(Rhs f, double t0, Vec y0, OdeOptions opts = {})
      : f_(std::move(f)), opts_(opts), t_(t0), y_(std::move(y0)) {
    k1_ = f_(t_, y_);
  }

  double t() const { return t_; }
  const Vec& y() const { return y_; }
  /// Derivative at the current point (first-same-as-last stage).
  const Vec& dydt() const { return k1_; }
  std::size_t accepted_steps() const { return accepted_; }
  std::size_t rejected_steps() const { return rejected_; }

  /// Integrates up to exactly `t_end` (which may lie behind t() for backward runs
  /// only when no step has been taken yet).
  void advance_to(double t_end) {
    if (t_end == t_) return;
    const double dir = t_end > t_ ? 1.0 : -1.0;
    if (h_ == 0.0) h_ = opts_.initial_step > 0.0 ? opts_.initial_step : initial_step(t_end);
    h_ = std::min(std::abs(h_), opts_.max_step);
    while ((t_end - t_) * dir > 0.0) {
      if (accepted_ + rejected_ >= opts_.max_steps)
        throw StepUnderflow("Dopri5: maximum number of steps exceeded", t_);
      const double min_step = opts_.min_step_factor * std::max(1.0, std::abs(t_));
      double h = std::min(h_, std::abs(t_end - t_));
      const bool last = h >= std::abs(t_end - t_) * (1.0 - 1e-13);
      if (h < min_step && !last) throw StepUnderflow("Dopri5: step size underflow", t_);
      const double err = attempt(dir * h);
      if (err <= 1.0) {
        t_ = last ? t_end : t_ + dir * h;
        y_ = std::move(y_new_);
        k1_ = std::move(k7_);
        ++accepted_;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        const double proposal = h * fac;
        // a step clipped to land on t_end keeps the natural step size
        h_ = std::min(opts_.max_step, h < h_ ? std::max(h_, proposal) : proposal);
      } else {
        ++rejected_;
        h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
        if (h_ < min_step) throw StepUnderflow("Dopri5: step size underflow", t_);
      }
      if (!std::isfinite(h_)) throw StepUnderflow("Dopri5: non-finite step size", t_);
    }
  }

 private:
  double error_norm(const Vec& err, const Vec& y0, const Vec& y1) const {
    const auto n = err.size();
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opts_.atol + opts_.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
      const double r = std::abs(err(i)) / sc;
      sum += r * r;
    }
    const double e = std::sqrt(sum / static_cast<double>(n));
    return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
  }

  double attempt(double h) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const Vec k2 = f_(t_ + c2 * h, y_ + h * (a21 * k1_));
    const Vec k3 = f_(t_ + c3 * h, y_ + h * (a31 * k1_ + a32 * k2));
    const Vec k4 = f_(t_ + c4 * h, y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
    const Vec k5 = f_(t_ + c5 * h, y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = f_(t_ + h, y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y_new_ = y_ + h * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7_ = f_(t_ + h, y_new_);
    const Vec err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7_);
    return error_norm(err, y_, y_new_);
  }

  // Hairer–Nørsett–Wanner starting step heuristic.
  double initial_step(double t_end) {
    const double span = std::abs(t_end - t_);
    const auto n = static_cast<double>(std::max<Eigen::Index>(1, y_.size()));
    double d0 = 0.0, d1 = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const double sc = opts_.atol + opts_.rtol * std::abs(y_(i));
      d0 += std::pow(std::abs(y_(i)) / sc, 2);
      d1 += std::pow(std::abs(k1_(i)) / sc, 2);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    const double dir = t_end > t_ ? 1.0 : -1.0;
    const Vec y1 = y_ + dir * h0 * k1_;
    const Vec f1 = f_(t_ + dir * h0, y1);
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const double sc = opts_.atol + opts_.rtol * std::abs(y_(i));
      d2 += std::pow(std::abs(f1(i) - k1_(i)) / sc, 2);
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
    return std::min({100.0 * h0, h1, span});
  }

  Rhs f_;
  OdeOptions opts_;
  double t_;
  Vec y_;
  Vec k1_, k7_, y_new_;
  double h_ = 0.0;
  std::size_t accepted_ = 0;
  std::size_t rejected_ = 0;
};

/// Integrates from times.front() through every time in `times` (non-decreasing),
/// calling observer(index, t, y) at each.
template <class Vec, class Observer>
void integrate_on_grid(std::function<Vec(double, const Vec&)> f, Vec y0, std::span<const double> times,
                       const OdeOptions& opts, Observer&& observer) {
  if (times.empty()) return;
  Dopri5<Vec> solver(std::move(f), times.front(), std::move(y0), opts);
  for (std::size_t i = 0; i < times.size(); ++i) {
    solver.advance_to(times[i]);
    observer(i, solver.t(), solver.y());
  }
}

inline std::vector<double> uniform_grid(double t0, double t1, std::size_t points) {
  if (points < 2) return {t0};
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(points - 1);
  g.back() = t1;
  return g;
}

}  // namespace tclp

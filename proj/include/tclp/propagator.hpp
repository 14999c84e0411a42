#pragma once

// Exact propagation dU/dt = λ L(t) U and the iterated time-ordered integrals
// G_k(t) = ∫_{t0}^{t} dt₁ … ∫_{t0}^{t_{k−1}} dt_k L(t₁)…L(t_k), transported in
// one adaptive pass through dG_k/dt = L(t) G_{k−1}(t).

#include <algorithm>
#include <optional>
#include <vector>

#include "tclp/linalg.hpp"
#include "tclp/models.hpp"
#include "tclp/ode.hpp"

namespace tclp {

struct PropagationOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  std::size_t grid_points = 512;
};

namespace detail {

inline std::size_t locate(const std::vector<double>& times, double t) {
  if (times.empty() || t < times.front() - 1e-12 * std::max(1.0, std::abs(times.front())) ||
      t > times.back() + 1e-12 * std::max(1.0, std::abs(times.back())))
    throw Error("time " + std::to_string(t) + " outside the stored grid");
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  return std::min(i, times.size() >= 2 ? times.size() - 2 : 0);
}

/// Cubic Hermite interpolation from values and derivatives at the bracketing nodes.
inline CMatrix hermite(double t, double ta, double tb, const CMatrix& ya, const CMatrix& yb, const CMatrix& da,
                       const CMatrix& db) {
  const double h = tb - ta;
  const double s = (t - ta) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * ya + (s3 - 2 * s2 + s) * h * da + (-2 * s3 + 3 * s2) * yb + (s3 - s2) * h * db;
}

}  // namespace detail

/// U_{t0}^{t} stored on a grid; U(t0) = I exactly.
class PropagatorGrid {
 public:
  PropagatorGrid() = default;
  PropagatorGrid(GeneratorFunction generator, double lambda, std::vector<double> times, std::vector<SuperOperator> u,
                 double tol)
      : generator_(std::move(generator)), lambda_(lambda), times_(std::move(times)), u_(std::move(u)), tol_(tol) {}

  const GeneratorFunction& generator() const { return generator_; }
  double lambda() const { return lambda_; }
  double t0() const { return times_.front(); }
  double t_max() const { return times_.back(); }
  double tol() const { return tol_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<SuperOperator>& values() const { return u_; }
  const SuperOperator& operator[](std::size_t i) const { return u_[i]; }
  std::size_t size() const { return times_.size(); }

  /// λ L(t) U(t) at a stored node.
  SuperOperator derivative_at(std::size_t i) const { return lambda_ * (generator_(times_[i]) * u_[i]); }

  /// U(t) anywhere on [t0, t_max]; exact at nodes, cubic Hermite in between.
  SuperOperator at(double t) const {
    if (times_.size() == 1) {
      detail::locate(times_, t);
      return u_.front();
    }
    const std::size_t i = detail::locate(times_, t);
    if (t == times_[i]) return u_[i];
    if (t == times_[i + 1]) return u_[i + 1];
    return SuperOperator(u_[i].dim(), detail::hermite(t, times_[i], times_[i + 1], u_[i].matrix(),
                                                      u_[i + 1].matrix(), derivative_at(i).matrix(),
                                                      derivative_at(i + 1).matrix()));
  }

 private:
  GeneratorFunction generator_;
  double lambda_ = 0.0;
  std::vector<double> times_;
  std::vector<SuperOperator> u_;
  double tol_ = 0.0;
};

/// G_k(t) for k = 0..k_max on a grid.
class IteratedIntegrals {
 public:
  IteratedIntegrals() = default;
  IteratedIntegrals(GeneratorFunction generator, std::vector<double> times, std::vector<std::vector<SuperOperator>> g)
      : generator_(std::move(generator)), times_(std::move(times)), g_(std::move(g)) {}

  int k_max() const { return static_cast<int>(g_.size()) - 1; }
  const std::vector<double>& times() const { return times_; }
  const GeneratorFunction& generator() const { return generator_; }
  const SuperOperator& at_index(int k, std::size_t i) const { return g_.at(static_cast<std::size_t>(k)).at(i); }

  SuperOperator at(int k, double t) const {
    if (k < 0 || k > k_max()) throw Error("IteratedIntegrals: order out of range");
    if (times_.size() == 1) return g_[static_cast<std::size_t>(k)].front();
    const std::size_t i = detail::locate(times_, t);
    const auto& gk = g_[static_cast<std::size_t>(k)];
    if (t == times_[i]) return gk[i];
    if (t == times_[i + 1]) return gk[i + 1];
    if (k == 0) return gk[i];
    const auto& gkm = g_[static_cast<std::size_t>(k - 1)];
    const CMatrix da = generator_(times_[i]).matrix() * gkm[i].matrix();
    const CMatrix db = generator_(times_[i + 1]).matrix() * gkm[i + 1].matrix();
    return SuperOperator(gk[i].dim(),
                         detail::hermite(t, times_[i], times_[i + 1], gk[i].matrix(), gk[i + 1].matrix(), da, db));
  }

 private:
  GeneratorFunction generator_;
  std::vector<double> times_;
  std::vector<std::vector<SuperOperator>> g_;
};

struct Transport {
  PropagatorGrid propagator;
  IteratedIntegrals iterated;
};

/// Joint pass: U with coupling λ and G_1..G_{k_max} share one step control.
inline Transport transport_on(const GeneratorFunction& l, double lambda, int k_max, std::vector<double> times,
                              const PropagationOptions& opts = {}) {
  if (times.empty()) throw Error("transport: empty time grid");
  if (k_max < 0) throw Error("transport: k_max must be non-negative");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw Error("transport: grid must be strictly increasing");
  const Eigen::Index d = l.dim();
  const Eigen::Index n = d * d;
  const Eigen::Index block = n * n;
  const auto layers = static_cast<Eigen::Index>(k_max) + 1;  // U, G_1..G_k

  CVector y0 = CVector::Zero(block * layers);
  y0.head(block) = vectorize(CMatrix::Identity(n, n));

  auto rhs = [&l, lambda, k_max, n, block](double t, const CVector& y) {
    const CMatrix lt = l(t).matrix();
    CVector dy(y.size());
    Eigen::Map<const CMatrix> u(y.data(), n, n);
    Eigen::Map<CMatrix>(dy.data(), n, n) = lambda * (lt * u);
    for (int k = 1; k <= k_max; ++k) {
      Eigen::Map<CMatrix> out(dy.data() + block * k, n, n);
      if (k == 1) {
        out = lt;
      } else {
        Eigen::Map<const CMatrix> prev(y.data() + block * (k - 1), n, n);
        out = lt * prev;
      }
    }
    return dy;
  };

  std::vector<SuperOperator> u;
  std::vector<std::vector<SuperOperator>> g(static_cast<std::size_t>(k_max) + 1);
  u.reserve(times.size());
  OdeOptions ode;
  ode.rtol = opts.rtol;
  ode.atol = opts.atol;
  integrate_on_grid<CVector>(rhs, y0, times, ode, [&](std::size_t, double, const CVector& y) {
    u.emplace_back(d, Eigen::Map<const CMatrix>(y.data(), n, n));
    g[0].push_back(SuperOperator::identity(d));
    for (int k = 1; k <= k_max; ++k)
      g[static_cast<std::size_t>(k)].emplace_back(d, Eigen::Map<const CMatrix>(y.data() + block * k, n, n));
  });
  u.front() = SuperOperator::identity(d);
  Transport out;
  out.propagator = PropagatorGrid(l, lambda, times, std::move(u), opts.rtol);
  out.iterated = IteratedIntegrals(l, std::move(times), std::move(g));
  return out;
}

inline Transport transport(const GeneratorFunction& l, double lambda, int k_max, double t0, double t_max,
                           const PropagationOptions& opts = {}) {
  if (t_max < t0) throw Error("transport: t_max < t0");
  return transport_on(l, lambda, k_max, uniform_grid(t0, t_max, t_max > t0 ? opts.grid_points : 1), opts);
}

inline PropagatorGrid propagate(const GeneratorFunction& l, double lambda, double t0, double t_max,
                                const PropagationOptions& opts = {}) {
  return transport(l, lambda, 0, t0, t_max, opts).propagator;
}

inline IteratedIntegrals dyson_terms(const GeneratorFunction& l, int k_max, double t0, double t_max,
                                     const PropagationOptions& opts = {}) {
  if (k_max < 1) throw Error("dyson_terms: k_max must be at least 1");
  return transport(l, 0.0, k_max, t0, t_max, opts).iterated;
}

/// U̇(t) = λ L(t) U(t).
inline SuperOperator derivative_U(const PropagatorGrid& grid, double t) {
  if (t < grid.t0() - 1e-12 || t > grid.t_max() + 1e-12) throw Error("derivative_U: time outside the grid");
  return grid.lambda() * (grid.generator()(t) * grid.at(t));
}

}  // namespace tclp

#pragma once

// Second-order mean-value equations for the Kawasaki–Gunton projector of an
// ansatz, and their numerical solution in E.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tclp/ansatz.hpp"
#include "tclp/fit.hpp"
#include "tclp/models.hpp"
#include "tclp/ode.hpp"
#include "tclp/propagator.hpp"

namespace tclp {

/// How the λ² gradient-product term is formed.
///  displayed: Tr(P⃗ · (a, ∂ρ)(b, ∂ρ)) with a matrix product of the two directional derivatives.
///  composed:  Tr(P⃗ L(t) (b, ∂ρ)), i.e. the superoperator product M̌₁M₁ applied to ρ_ans.
/// Here a = Tr(P⃗ L(t) ρ_ans) and b = Tr(P⃗ G₁(t) ρ_ans).
enum class CorrectionForm { displayed, composed };

inline std::string to_string(CorrectionForm f) { return f == CorrectionForm::displayed ? "displayed" : "composed"; }

/// The three pieces of the averaged right-hand side, without powers of λ.
struct SecondOrderTerms {
  RVec first;         // Tr(P⃗ L ρ_ans)
  RVec double_layer;  // Tr(P⃗ L G₁ ρ_ans)
  RVec correction;    // gradient-product term (enters with a minus sign)

  RVec combine(double lambda) const { return lambda * first + lambda * lambda * (double_layer - correction); }
};

namespace detail {

inline CMatrix directional(const std::vector<CMatrix>& grad, const RVec& w) {
  CMatrix out = CMatrix::Zero(grad.front().rows(), grad.front().cols());
  for (std::size_t m = 0; m < grad.size(); ++m) out += w(static_cast<Eigen::Index>(m)) * grad[m];
  return out;
}

}  // namespace detail

/// Tr(P⃗ L(t) ρ_ans(E)) with the generator already evaluated at t.
inline RVec first_order_term(const Ansatz& a, const SuperOperator& l_t, const RVec& e) {
  return a.observables().averages(l_t.apply(a.eval(e)));
}

inline RVec first_order_rhs(const Ansatz& a, const SuperOperator& l_t, const RVec& e, double lambda) {
  if (lambda == 0.0) {
    a.require_in_domain(e);
    return RVec::Zero(e.size());
  }
  return lambda * first_order_term(a, l_t, e);
}

inline RVec first_order_rhs(const Ansatz& a, const GeneratorFunction& l, double t, const RVec& e, double lambda) {
  return first_order_rhs(a, l(t), e, lambda);
}

/// All pieces at one time, given L(t) and G₁(t) = ∫_{t₀}^t L.
inline SecondOrderTerms second_order_terms(const Ansatz& a, const SuperOperator& l_t, const SuperOperator& g1_t,
                                           const RVec& e, CorrectionForm form = CorrectionForm::displayed) {
  const CMatrix rho = a.eval(e);
  const auto grad = a.grad(e);
  const auto& obs = a.observables();
  SecondOrderTerms out;
  const CMatrix l_rho = l_t.apply(rho);
  const CMatrix g_rho = g1_t.apply(rho);
  out.first = obs.averages(l_rho);
  out.double_layer = obs.averages(l_t.apply(g_rho));
  const RVec b = obs.averages(g_rho);
  if (form == CorrectionForm::displayed)
    out.correction = obs.averages(detail::directional(grad, out.first) * detail::directional(grad, b));
  else
    out.correction = obs.averages(l_t.apply(detail::directional(grad, b)));
  return out;
}

inline RVec second_order_rhs(const Ansatz& a, const SuperOperator& l_t, const SuperOperator& g1_t, const RVec& e,
                             double lambda, CorrectionForm form = CorrectionForm::displayed) {
  if (lambda == 0.0) {
    a.require_in_domain(e);
    return RVec::Zero(e.size());
  }
  return second_order_terms(a, l_t, g1_t, e, form).combine(lambda);
}

inline RVec second_order_rhs(const Ansatz& a, const GeneratorFunction& l, const IteratedIntegrals& g, double t,
                             const RVec& e, double lambda, CorrectionForm form = CorrectionForm::displayed) {
  if (g.k_max() < 1) throw Error("second_order_rhs: iterated integrals must include G_1");
  return second_order_rhs(a, l(t), g.at(1, t), e, lambda, form);
}

struct MeanOptions {
  int order = 2;
  CorrectionForm correction = CorrectionForm::displayed;
  OdeOptions ode{1e-12, 1e-14};
  std::size_t grid_points = 301;
  /// Integrate y = √E when the ansatz declares a square-root coordinate.
  bool sqrt_substitution = true;
};

struct MeanTrajectory {
  std::vector<double> times;
  std::vector<RVec> E;
  int order = 2;
  CorrectionForm correction = CorrectionForm::displayed;
  double lambda = 0.0;
  AnsatzPtr ansatz;

  std::size_t size() const { return times.size(); }
  CMatrix rho(std::size_t i) const { return ansatz->eval(E.at(i)); }
  std::vector<double> component(Eigen::Index m) const {
    std::vector<double> out;
    for (const auto& e : E) out.push_back(e(m));
    return out;
  }
};

/// Solves dE/dt = (first or second order right-hand side) on `times`. For the
/// second order, G₁(t) is integrated jointly with E.
inline MeanTrajectory solve_mean(AnsatzPtr a, const GeneratorFunction& l, double lambda, const RVec& e0,
                                 const std::vector<double>& times, const MeanOptions& opts = {}) {
  if (opts.order != 1 && opts.order != 2) throw ValidationError("solve_mean: order must be 1 or 2", "order");
  if (times.empty()) throw Error("solve_mean: empty time grid");
  if (l.dim() != a->dim()) throw DimensionMismatch("solve_mean: generator and ansatz dimensions differ");
  a->require_in_domain(e0);
  const Eigen::Index m = e0.size();
  const Eigen::Index n = l.dim() * l.dim();
  const bool second = opts.order == 2;
  const bool root = opts.sqrt_substitution && a->sqrt_coordinate();
  if (root && (e0.array() <= 0.0).any()) throw DomainViolation("solve_mean: square-root coordinate needs E > 0");

  CVector y0 = CVector::Zero(m + (second ? n * n : 0));
  for (Eigen::Index k = 0; k < m; ++k) y0(k) = root ? std::sqrt(e0(k)) : e0(k);

  auto to_e = [root, m](const CVector& y) {
    RVec e(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double v = y(k).real();
      e(k) = root ? v * v : v;
    }
    return e;
  };

  auto rhs = [&, root, second, m, n](double t, const CVector& y) {
    CVector dy = CVector::Zero(y.size());
    const RVec e = to_e(y);
    if (root && (y.head(m).real().array() <= 0.0).any())
      throw DomainExit("solve_mean: square-root coordinate reached zero at t = " + std::to_string(t), t);
    if (!a->domain().contains(e))
      throw DomainExit("solve_mean: E left the ansatz domain at t = " + std::to_string(t), t);
    const SuperOperator lt = l(t);
    RVec de;
    try {
      if (second) {
        const SuperOperator g1(l.dim(), Eigen::Map<const CMatrix>(y.data() + m, n, n));
        de = lambda == 0.0 ? RVec::Zero(m) : second_order_terms(*a, lt, g1, e, opts.correction).combine(lambda);
        Eigen::Map<CMatrix>(dy.data() + m, n, n) = lt.matrix();
      } else {
        de = lambda == 0.0 ? RVec::Zero(m) : RVec(lambda * first_order_term(*a, lt, e));
      }
    } catch (const DomainViolation& err) {
      throw DomainExit(std::string("solve_mean: ") + err.what(), t);
    }
    for (Eigen::Index k = 0; k < m; ++k) dy(k) = root ? de(k) / (2.0 * y(k).real()) : de(k);
    return dy;
  };

  MeanTrajectory out;
  out.order = opts.order;
  out.correction = opts.correction;
  out.lambda = lambda;
  out.ansatz = a;
  integrate_on_grid<CVector>(rhs, y0, std::span<const double>(times), opts.ode,
                             [&](std::size_t, double t, const CVector& y) {
                               out.times.push_back(t);
                               out.E.push_back(to_e(y));
                             });
  return out;
}

inline MeanTrajectory solve_mean(AnsatzPtr a, const GeneratorFunction& l, double lambda, const RVec& e0, double t0,
                                 double t_max, const MeanOptions& opts = {}) {
  return solve_mean(std::move(a), l, lambda, e0, uniform_grid(t0, t_max, opts.grid_points), opts);
}

/// One λ of a branch study: numeric trajectory, exact reference and the two
/// closed-form branches, all on the same grid.
struct BranchSample {
  double lambda = 0.0;
  std::vector<double> numeric, exact, minus, plus;
};

struct BranchReport {
  std::vector<double> lambdas;
  /// "minus", "plus", or "both" when the branches coincide.
  std::vector<std::string> tracked;
  std::vector<double> numeric_error, minus_error, plus_error;  // sup over the grid
  LogLogFit minus_fit, plus_fit;
  bool fitted = false;
};

namespace detail {

inline double sup_gap(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("branch_monitor: series lengths differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!std::isfinite(d)) return std::numeric_limits<double>::quiet_NaN();
    m = std::max(m, d);
  }
  return m;
}

}  // namespace detail

/// Which branch the numerical solution follows, and the error order of each
/// branch against the exact reference (fitted over the λ > 0 samples).
inline BranchReport branch_monitor(const std::vector<BranchSample>& samples, double coincide_tol = 1e-14) {
  BranchReport r;
  std::vector<double> fit_l, fit_minus, fit_plus;
  for (const auto& s : samples) {
    r.lambdas.push_back(s.lambda);
    const double to_minus = detail::sup_gap(s.numeric, s.minus);
    const double to_plus = detail::sup_gap(s.numeric, s.plus);
    const double spread = detail::sup_gap(s.minus, s.plus);
    r.tracked.push_back(spread <= coincide_tol ? "both" : (to_minus <= to_plus ? "minus" : "plus"));
    r.numeric_error.push_back(detail::sup_gap(s.numeric, s.exact));
    r.minus_error.push_back(detail::sup_gap(s.minus, s.exact));
    r.plus_error.push_back(detail::sup_gap(s.plus, s.exact));
    if (s.lambda > 0.0 && r.minus_error.back() > 0.0 && r.plus_error.back() > 0.0) {
      fit_l.push_back(s.lambda);
      fit_minus.push_back(r.minus_error.back());
      fit_plus.push_back(r.plus_error.back());
    }
  }
  if (fit_l.size() >= 2) {
    r.minus_fit = fit_loglog(fit_l, fit_minus);
    r.plus_fit = fit_loglog(fit_l, fit_plus);
    r.fitted = true;
  }
  return r;
}

}  // namespace tclp

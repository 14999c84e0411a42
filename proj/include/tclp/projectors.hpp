#pragma once

// Projector families P(t) with Ṗ(t): constant, Argyres–Kelley with a moving
// reservoir state, and the generalized Kawasaki–Gunton projector of an ansatz.

#include <functional>
#include <string>
#include <vector>

#include "tclp/ansatz.hpp"
#include "tclp/linalg.hpp"
#include "tclp/propagator.hpp"

namespace tclp {

/// P(E) X = ρ_ans(E) Tr X + Σ_m (Tr(X P_m) − E_m Tr X) ∂ρ_ans/∂E_m.
inline SuperOperator kg_parametric(const Ansatz& a, const RVec& e, const CMatrix& rho, const std::vector<CMatrix>& grad) {
  const Eigen::Index d = a.dim();
  const Eigen::RowVectorXcd tr = trace_row(d);
  CMatrix m = vectorize(rho) * tr;
  for (std::size_t k = 0; k < a.size(); ++k)
    m += vectorize(grad[k]) * (expectation_row(a.observables()[k]) - e(static_cast<Eigen::Index>(k)) * tr);
  return SuperOperator(d, std::move(m));
}

inline SuperOperator kg_parametric(const Ansatz& a, const RVec& e) { return kg_parametric(a, e, a.eval(e), a.grad(e)); }

/// The parametric projector evaluated at E = Tr(P ρ).
inline SuperOperator kg_nonlinear(const Ansatz& a, const CMatrix& rho) {
  if (rho.rows() != a.dim() || rho.cols() != a.dim()) throw DimensionMismatch("kg_nonlinear: dimension mismatch");
  return kg_parametric(a, a.observables().averages(rho));
}

/// ∂P(E)/∂E_m by central differences.
inline std::vector<SuperOperator> kg_parametric_derivatives(const Ansatz& a, const RVec& e, double step = 1e-5) {
  std::vector<SuperOperator> out;
  for (Eigen::Index m = 0; m < e.size(); ++m) {
    RVec ep = e, em = e;
    ep(m) += step;
    em(m) -= step;
    out.push_back((1.0 / (2.0 * step)) * (kg_parametric(a, ep) - kg_parametric(a, em)));
  }
  return out;
}

enum class ProjectorKind { constant, argyres_kelley, kg };

inline std::string to_string(ProjectorKind k) {
  switch (k) {
    case ProjectorKind::constant: return "constant";
    case ProjectorKind::argyres_kelley: return "argyres_kelley";
    case ProjectorKind::kg: return "kg";
  }
  return "unknown";
}

class ProjectorFamily {
 public:
  using Eval = std::function<SuperOperator(double)>;

  ProjectorFamily() = default;
  ProjectorFamily(Eigen::Index dim, ProjectorKind kind, Eval eval, Eval deriv)
      : dim_(dim), kind_(kind), eval_(std::move(eval)), deriv_(std::move(deriv)) {}

  Eigen::Index dim() const { return dim_; }
  ProjectorKind kind() const { return kind_; }
  SuperOperator operator()(double t) const { return eval_(t); }
  SuperOperator derivative(double t) const { return deriv_(t); }
  SuperOperator complement(double t) const { return SuperOperator::identity(dim_) - eval_(t); }

 private:
  Eigen::Index dim_ = 0;
  ProjectorKind kind_ = ProjectorKind::constant;
  Eval eval_, deriv_;
};

inline ProjectorFamily constant_projector(SuperOperator p) {
  const auto d = p.dim();
  return ProjectorFamily(
      d, ProjectorKind::constant, [p = std::move(p)](double) { return p; },
      [d](double) { return SuperOperator::zero(d); });
}

/// t ↦ ρ(t) together with ρ̇(t).
struct StateTrajectory {
  std::function<CMatrix(double)> state;
  std::function<CMatrix(double)> rate;
};

/// ρ(t) = U(t) ρ₀ and ρ̇(t) = λ L(t) U(t) ρ₀ from a stored propagator.
inline StateTrajectory trajectory_from(const PropagatorGrid& grid, const CMatrix& rho0) {
  return {[grid, rho0](double t) { return grid.at(t).apply(rho0); },
          [grid, rho0](double t) { return derivative_U(grid, t).apply(rho0); }};
}

/// P(t) = kg_nonlinear(ansatz, ρ(t)); Ṗ(t) = Σ_m Tr(P_m ρ̇(t)) ∂P/∂E_m.
inline ProjectorFamily kg_time_dependent(AnsatzPtr a, StateTrajectory traj, double step = 1e-5) {
  const auto d = a->dim();
  auto eval = [a, traj](double t) { return kg_nonlinear(*a, traj.state(t)); };
  auto deriv = [a, traj, step, d](double t) {
    const RVec e = a->observables().averages(traj.state(t));
    const RVec de = a->observables().averages(traj.rate(t));
    const auto dp = kg_parametric_derivatives(*a, e, step);
    SuperOperator out = SuperOperator::zero(d);
    for (std::size_t m = 0; m < dp.size(); ++m) out += de(static_cast<Eigen::Index>(m)) * dp[m];
    return out;
  };
  return ProjectorFamily(d, ProjectorKind::kg, eval, deriv);
}

/// Tr_B of an operator on S ⊗ B (row index s·d_B + b).
inline CMatrix partial_trace_B(const CMatrix& x, Eigen::Index ds, Eigen::Index db) {
  if (x.rows() != ds * db || x.cols() != ds * db) throw DimensionMismatch("partial_trace_B: dimension mismatch");
  CMatrix out = CMatrix::Zero(ds, ds);
  for (Eigen::Index s = 0; s < ds; ++s)
    for (Eigen::Index s2 = 0; s2 < ds; ++s2)
      for (Eigen::Index b = 0; b < db; ++b) out(s, s2) += x(s * db + b, s2 * db + b);
  return out;
}

/// X ↦ Tr_B(X) ⊗ σ, for any B-operator σ.
inline SuperOperator trace_and_attach(const CMatrix& sigma, Eigen::Index ds) {
  const Eigen::Index db = sigma.rows();
  const Eigen::Index d = ds * db;
  CMatrix m(d * d, d * d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      CMatrix unit = CMatrix::Zero(d, d);
      unit(i, j) = 1.0;
      const CMatrix img = Eigen::kroneckerProduct(partial_trace_B(unit, ds, db), sigma).eval();
      m.col(i + d * j) = vectorize(img);
    }
  return SuperOperator(d, std::move(m));
}

/// P(t) X = Tr_B X ⊗ ρ_B(t). Without an explicit ρ̇_B, central differences are used.
inline ProjectorFamily argyres_kelley(std::function<CMatrix(double)> rho_b, Eigen::Index ds, Eigen::Index db,
                                      std::function<CMatrix(double)> rho_b_dot = {}) {
  if (ds < 1 || db < 1) throw DimensionMismatch("argyres_kelley: subsystem dimensions must be positive");
  auto checked = [rho_b, db](double t) {
    CMatrix r = rho_b(t);
    if (r.rows() != db || r.cols() != db) throw DimensionMismatch("argyres_kelley: reservoir state dimension");
    if (std::abs(r.trace() - 1.0) > 1e-10) throw ValidationError("argyres_kelley: Tr ρ_B(t) must be 1", "rho_b");
    return r;
  };
  if (!rho_b_dot)
    rho_b_dot = [rho_b](double t) {
      const double h = 1e-5 * std::max(1.0, std::abs(t));
      return CMatrix((rho_b(t + h) - rho_b(t - h)) / (2 * h));
    };
  return ProjectorFamily(
      ds * db, ProjectorKind::argyres_kelley, [checked, ds](double t) { return trace_and_attach(checked(t), ds); },
      [rho_b_dot, ds](double t) { return trace_and_attach(rho_b_dot(t), ds); });
}

struct ProjectorLawReport {
  // residuals are maximal entrywise moduli of the superoperator difference
  double idempotency = 0.0;   // P² − P
  double composition = 0.0;   // P(a)P(b) − P(a) over sampled pairs
  double trace = 0.0;         // max |Tr(P X) − Tr X| over the matrix units
  std::size_t samples = 0;

  double worst() const { return std::max({idempotency, composition, trace}); }
};

namespace detail {

inline double trace_defect(const SuperOperator& p) {
  const Eigen::RowVectorXcd tr = trace_row(p.dim());
  return max_abs(tr * p.matrix() - tr);
}

inline double entry_defect(const SuperOperator& a, const SuperOperator& b) { return max_abs((a - b).matrix()); }

}  // namespace detail

/// Laws of a family on sampled times: idempotency and P(t)P(t′) = P(t).
inline ProjectorLawReport check_projector_laws(const ProjectorFamily& f, const std::vector<double>& times) {
  ProjectorLawReport r;
  std::vector<SuperOperator> ps;
  for (double t : times) ps.push_back(f(t));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    r.idempotency = std::max(r.idempotency, detail::entry_defect(ps[i] * ps[i], ps[i]));
    r.trace = std::max(r.trace, detail::trace_defect(ps[i]));
    for (std::size_t j = 0; j < ps.size(); ++j) {
      r.composition = std::max(r.composition, detail::entry_defect(ps[i] * ps[j], ps[i]));
      ++r.samples;
    }
  }
  return r;
}

/// Laws of the parametric KG projector on sampled pairs (E, E′).
inline ProjectorLawReport check_projector_laws(const Ansatz& a, const std::vector<std::pair<RVec, RVec>>& pairs) {
  ProjectorLawReport r;
  for (const auto& [e, e2] : pairs) {
    const SuperOperator p = kg_parametric(a, e), p2 = kg_parametric(a, e2);
    r.idempotency = std::max(r.idempotency, detail::entry_defect(p * p, p));
    r.composition = std::max(r.composition, detail::entry_defect(p * p2, p));
    r.trace = std::max(r.trace, detail::trace_defect(p));
    ++r.samples;
  }
  return r;
}

}  // namespace tclp

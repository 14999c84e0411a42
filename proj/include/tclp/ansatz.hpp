#pragma once

// Relevant observables P_m and ansatz families ρ_ans(E) with Tr(P_m ρ_ans(E)) = E_m.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tclp/linalg.hpp"

namespace tclp {

class RelevantObservables {
 public:
  RelevantObservables() = default;
  explicit RelevantObservables(std::vector<CMatrix> ops) : ops_(std::move(ops)) {
    if (ops_.empty()) throw ValidationError("RelevantObservables: at least one observable is required", "observables");
    const Eigen::Index d = ops_.front().rows();
    for (const auto& p : ops_) {
      if (p.rows() != d || p.cols() != d) throw DimensionMismatch("RelevantObservables: inconsistent dimensions");
      if (!is_hermitian(p, 1e-12)) throw NotHermitian("RelevantObservables: observable is not Hermitian");
    }
    // Gram matrix of {I, P_1, ..., P_M}
    std::vector<CMatrix> all{CMatrix::Identity(d, d)};
    all.insert(all.end(), ops_.begin(), ops_.end());
    const auto n = static_cast<Eigen::Index>(all.size());
    CMatrix gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        gram(i, j) = hs_inner(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    Eigen::JacobiSVD<CMatrix> svd(gram);
    if (svd.singularValues()(n - 1) <= 1e-10)
      throw ValidationError("RelevantObservables: {I, P_m} are linearly dependent", "observables");
  }

  std::size_t size() const { return ops_.size(); }
  Eigen::Index dim() const { return ops_.empty() ? 0 : ops_.front().rows(); }
  const CMatrix& operator[](std::size_t m) const { return ops_[m]; }
  const std::vector<CMatrix>& ops() const { return ops_; }

  /// E_m = Re Tr(P_m X).
  RVec averages(const CMatrix& x) const {
    RVec e(static_cast<Eigen::Index>(ops_.size()));
    for (std::size_t m = 0; m < ops_.size(); ++m) e(static_cast<Eigen::Index>(m)) = (ops_[m] * x).trace().real();
    return e;
  }
  /// Complex Tr(P_m X), used for non-Hermitian arguments of superoperators.
  CVector traces(const CMatrix& x) const {
    CVector e(static_cast<Eigen::Index>(ops_.size()));
    for (std::size_t m = 0; m < ops_.size(); ++m) e(static_cast<Eigen::Index>(m)) = (ops_[m] * x).trace();
    return e;
  }

 private:
  std::vector<CMatrix> ops_;
};

/// Open box lower < E < upper.
struct Domain {
  RVec lower, upper;

  bool contains(const RVec& e) const {
    if (e.size() != lower.size()) return false;
    for (Eigen::Index m = 0; m < e.size(); ++m)
      if (!(e(m) > lower(m) && e(m) < upper(m))) return false;
    return true;
  }

  static Domain box(const RVec& lower, const RVec& upper) {
    if (lower.size() != upper.size() || (upper.array() <= lower.array()).any())
      throw ValidationError("Domain: empty box", "domain");
    return Domain{lower, upper};
  }

  /// Box centred in each spectral range, scaled so the box stays inside the
  /// realizable set for noncommuting observables as well.
  static Domain spectral(const RelevantObservables& obs, double fraction = 0.9) {
    const auto m = static_cast<Eigen::Index>(obs.size());
    RVec lo(m), hi(m);
    const double shrink = fraction / std::sqrt(static_cast<double>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(obs[static_cast<std::size_t>(k)], Eigen::EigenvaluesOnly);
      const double a = es.eigenvalues().minCoeff(), b = es.eigenvalues().maxCoeff();
      const double c = 0.5 * (a + b), h = 0.5 * (b - a) * shrink;
      lo(k) = c - h;
      hi(k) = c + h;
    }
    return box(lo, hi);
  }
};

class Ansatz {
 public:
  Ansatz(RelevantObservables obs, Domain domain) : obs_(std::move(obs)), domain_(std::move(domain)) {
    if (domain_.lower.size() != static_cast<Eigen::Index>(obs_.size()))
      throw DimensionMismatch("Ansatz: domain dimension differs from the number of observables");
  }
  virtual ~Ansatz() = default;

  const RelevantObservables& observables() const { return obs_; }
  const Domain& domain() const { return domain_; }
  Eigen::Index dim() const { return obs_.dim(); }
  std::size_t size() const { return obs_.size(); }

  virtual std::string name() const = 0;
  virtual CMatrix eval(const RVec& e) const = 0;
  /// ∂ρ_ans/∂E_m for m = 1..M. Defaults to central differences.
  virtual std::vector<CMatrix> grad(const RVec& e) const;
  /// The mean-value solver may integrate y = √E instead of E (single parameter only).
  virtual bool sqrt_coordinate() const { return false; }

  void require_in_domain(const RVec& e) const {
    if (!domain_.contains(e)) throw DomainViolation(name() + ": parameters outside the ansatz domain");
  }

 private:
  RelevantObservables obs_;
  Domain domain_;
};

using AnsatzPtr = std::shared_ptr<const Ansatz>;

/// Central differences with h_m = h (or 1e-5·(1+|E_m|) when h ≤ 0).
inline std::vector<CMatrix> numeric_grad(const Ansatz& a, const RVec& e, double h = 0.0) {
  a.require_in_domain(e);
  std::vector<CMatrix> out;
  out.reserve(a.size());
  for (Eigen::Index m = 0; m < e.size(); ++m) {
    const double hm = h > 0.0 ? h : 1e-5 * (1.0 + std::abs(e(m)));
    RVec ep = e, em = e;
    ep(m) += hm;
    em(m) -= hm;
    if (!a.domain().contains(ep) || !a.domain().contains(em))
      throw DomainViolation(a.name() + ": finite-difference stencil leaves the domain");
    out.push_back((a.eval(ep) - a.eval(em)) / (2.0 * hm));
  }
  return out;
}

inline std::vector<CMatrix> Ansatz::grad(const RVec& e) const { return numeric_grad(*this, e); }

namespace detail {

inline CMatrix weighted_sum(const RelevantObservables& obs, const RVec& w) {
  CMatrix s = CMatrix::Zero(obs.dim(), obs.dim());
  for (std::size_t m = 0; m < obs.size(); ++m) s += w(static_cast<Eigen::Index>(m)) * obs[m];
  return s;
}

/// Damped Newton on r(β) = 0. `eval` returns the residual and Jacobian at β, or
/// nullopt when β is inadmissible.
struct NewtonPoint {
  RVec residual;
  Eigen::MatrixXd jacobian;
};

template <class Eval>
RVec damped_newton(const std::string& who, Eval&& eval, RVec beta, double tol = 1e-12, int max_iter = 100) {
  std::optional<NewtonPoint> cur = eval(beta);
  if (!cur) throw DomainViolation(who + ": initial multipliers are inadmissible");
  for (int it = 0; it < max_iter; ++it) {
    const double r0 = cur->residual.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(r0)) throw NewtonDiverged(who + ": non-finite residual", r0);
    if (r0 <= tol) return beta;
    const RVec delta = cur->jacobian.colPivHouseholderQr().solve(-cur->residual);
    if (!delta.allFinite()) throw NewtonDiverged(who + ": singular Jacobian", r0);
    double s = 1.0;
    bool accepted = false, any_admissible = false;
    for (int k = 0; k < 40; ++k, s *= 0.5) {
      const RVec trial = beta + s * delta;
      auto next = eval(trial);
      if (!next) continue;
      any_admissible = true;
      if (next->residual.template lpNorm<Eigen::Infinity>() < r0) {
        beta = trial;
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_admissible) throw DomainViolation(who + ": Newton path leaves the admissible region");
      if (r0 <= 100 * tol) return beta;  // stalled at rounding level
      throw NewtonDiverged(who + ": damping failed to reduce the residual", r0);
    }
  }
  const double r = cur->residual.lpNorm<Eigen::Infinity>();
  if (r <= tol) return beta;
  throw NewtonDiverged(who + ": no convergence within the iteration limit", r);
}

/// Daleckii–Krein derivative of f(A) in direction D for Hermitian A = V diag(a) V†.
template <class F, class DF>
CMatrix spectral_derivative(const CMatrix& v, const RVec& a, const CMatrix& d, F&& f, DF&& df) {
  const Eigen::Index n = a.size();
  CMatrix dt = v.adjoint() * d * v;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gap = a(i) - a(j);
      const double w = std::abs(gap) <= 1e-10 * std::max(1.0, std::abs(a(i))) ? df(0.5 * (a(i) + a(j)))
                                                                             : (f(a(i)) - f(a(j))) / gap;
      dt(i, j) *= w;
    }
  return v * dt * v.adjoint();
}

}  // namespace detail

/// ρ = e^{−(β, P)} / Z with β(E) from the consistency conditions.
class GibbsAnsatz final : public Ansatz {
 public:
  explicit GibbsAnsatz(RelevantObservables obs, std::optional<Domain> domain = std::nullopt)
      : Ansatz(obs, domain ? *domain : Domain::spectral(obs)) {}

  std::string name() const override { return "gibbs"; }

  /// Multipliers β(E); `guess` enables continuation along a trajectory.
  RVec multipliers(const RVec& e, const RVec* guess = nullptr) const {
    require_in_domain(e);
    RVec beta0 = guess ? *guess : RVec::Zero(e.size());
    return detail::damped_newton(
        name(), [&](const RVec& b) -> std::optional<detail::NewtonPoint> { return point(b, e); }, beta0);
  }

  /// ρ at given multipliers.
  CMatrix state(const RVec& beta) const { return parts(beta).rho; }

  CMatrix eval(const RVec& e) const override { return state(multipliers(e)); }

  /// Implicit-function gradient: ∂ρ/∂E = (∂ρ/∂β) J⁻¹ with J = ∂E/∂β.
  std::vector<CMatrix> grad(const RVec& e) const override {
    const RVec beta = multipliers(e);
    const Parts p = parts(beta);
    const Eigen::MatrixXd jinv = jacobian(p).inverse();
    std::vector<CMatrix> out(size(), CMatrix::Zero(dim(), dim()));
    for (std::size_t m = 0; m < size(); ++m)
      for (std::size_t n = 0; n < size(); ++n)
        out[m] += jinv(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) * p.drho[n];
    return out;
  }

 private:
  struct Parts {
    CMatrix rho;
    std::vector<CMatrix> drho;  // ∂ρ/∂β_n
  };

  Parts parts(const RVec& beta) const {
    const CMatrix h = detail::weighted_sum(observables(), beta);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    const CMatrix a = -(h - es.eigenvalues().minCoeff() * CMatrix::Identity(dim(), dim()));
    const CMatrix ea = expm(a);
    const Complex z = ea.trace();
    Parts p;
    p.rho = ea / z;
    for (std::size_t n = 0; n < size(); ++n) {
      // shift drops out of ∂ρ/∂β after normalization
      const CMatrix f = expm_frechet(a, -observables()[n]);
      p.drho.push_back((f - p.rho * f.trace()) / z);
    }
    return p;
  }

  Eigen::MatrixXd jacobian(const Parts& p) const {
    const auto m = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd j(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c)
        j(r, c) = (observables()[static_cast<std::size_t>(r)] * p.drho[static_cast<std::size_t>(c)]).trace().real();
    return j;
  }

  std::optional<detail::NewtonPoint> point(const RVec& beta, const RVec& e) const {
    const Parts p = parts(beta);
    if (!p.rho.allFinite()) return std::nullopt;
    return detail::NewtonPoint{observables().averages(p.rho) - e, jacobian(p)};
  }
};

/// ρ ∝ (I + ((q−1)/q)(β, E − P))^{1/(q−1)}.
class RenyiAnsatz final : public Ansatz {
 public:
  RenyiAnsatz(double q, RelevantObservables obs, std::optional<Domain> domain = std::nullopt)
      : Ansatz(obs, domain ? *domain : Domain::spectral(obs)), q_(q) {
    if (!(q > 0.0) || std::abs(q - 1.0) < 1e-12) throw ValidationError("RenyiAnsatz: q must be positive and != 1", "q");
  }

  std::string name() const override { return "renyi"; }
  double q() const { return q_; }

  RVec multipliers(const RVec& e, const RVec* guess = nullptr) const {
    require_in_domain(e);
    RVec beta0 = guess ? *guess : RVec::Zero(e.size());
    return detail::damped_newton(
        name(),
        [&](const RVec& b) -> std::optional<detail::NewtonPoint> {
          auto p = parts(b, e);
          if (!p) return std::nullopt;
          return detail::NewtonPoint{observables().averages(p->rho) - e, jacobian_beta(*p)};
        },
        beta0);
  }

  CMatrix eval(const RVec& e) const override {
    auto p = parts(multipliers(e), e);
    if (!p) throw DomainViolation("renyi: base matrix is not positive semidefinite at the solution");
    return p->rho;
  }

  /// Total derivative dρ/dE = ∂ρ/∂E|_β − (∂ρ/∂β) J_β⁻¹ ∂r/∂E.
  std::vector<CMatrix> grad(const RVec& e) const override {
    const RVec beta = multipliers(e);
    auto p = parts(beta, e);
    if (!p) throw DomainViolation("renyi: base matrix is not positive semidefinite at the solution");
    const auto m = static_cast<Eigen::Index>(size());
    const Eigen::MatrixXd jb = jacobian_beta(*p);
    Eigen::MatrixXd dr_de(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c)
        dr_de(r, c) = (observables()[static_cast<std::size_t>(r)] * p->drho_e[static_cast<std::size_t>(c)])
                          .trace()
                          .real() -
                      (r == c ? 1.0 : 0.0);
    const Eigen::MatrixXd dbeta_de = -jb.colPivHouseholderQr().solve(dr_de);
    std::vector<CMatrix> out;
    for (Eigen::Index c = 0; c < m; ++c) {
      CMatrix g = p->drho_e[static_cast<std::size_t>(c)];
      for (Eigen::Index n = 0; n < m; ++n) g += dbeta_de(n, c) * p->drho_beta[static_cast<std::size_t>(n)];
      out.push_back(g);
    }
    return out;
  }

 private:
  struct Parts {
    CMatrix rho;
    std::vector<CMatrix> drho_beta, drho_e;
  };

  double power() const { return 1.0 / (q_ - 1.0); }

  std::optional<Parts> parts(const RVec& beta, const RVec& e) const {
    const Eigen::Index d = dim();
    const double c = (q_ - 1.0) / q_;
    const CMatrix id = CMatrix::Identity(d, d);
    CMatrix a = id;
    for (std::size_t m = 0; m < size(); ++m)
      a += c * beta(static_cast<Eigen::Index>(m)) * (e(static_cast<Eigen::Index>(m)) * id - observables()[m]);
    a = 0.5 * (a + a.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
    const RVec& ev = es.eigenvalues();
    const double p = power();
    // x^p needs x ≥ 0, and x > 0 for negative p
    if (ev.minCoeff() < 0.0 || (p < 0.0 && ev.minCoeff() <= 0.0) || !ev.allFinite()) return std::nullopt;
    const CMatrix& v = es.eigenvectors();
    auto f = [p](double x) { return std::pow(x, p); };
    auto df = [p](double x) { return p * std::pow(x, p - 1.0); };
    RVec fv(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) fv(i) = f(ev(i));
    const CMatrix fa = v * fv.cast<Complex>().asDiagonal() * v.adjoint();
    const Complex z = fa.trace();
    Parts out;
    out.rho = fa / z;
    auto normalized = [&](const CMatrix& dfa) -> CMatrix { return (dfa - out.rho * dfa.trace()) / z; };
    for (std::size_t m = 0; m < size(); ++m) {
      const CMatrix da_dbeta = c * (e(static_cast<Eigen::Index>(m)) * id - observables()[m]);
      out.drho_beta.push_back(normalized(detail::spectral_derivative(v, ev, da_dbeta, f, df)));
      const CMatrix da_de = c * beta(static_cast<Eigen::Index>(m)) * id;
      out.drho_e.push_back(normalized(detail::spectral_derivative(v, ev, da_de, f, df)));
    }
    if (!out.rho.allFinite()) return std::nullopt;
    return out;
  }

  Eigen::MatrixXd jacobian_beta(const Parts& p) const {
    const auto m = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd j(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c)
        j(r, c) =
            (observables()[static_cast<std::size_t>(r)] * p.drho_beta[static_cast<std::size_t>(c)]).trace().real();
    return j;
  }

  double q_;
};

/// ρ = B₀ + (E, B) with Tr(B_k P_m) = δ_km, P₀ = I.
class LinearAnsatz final : public Ansatz {
 public:
  LinearAnsatz(CMatrix b0, std::vector<CMatrix> b, RelevantObservables obs, std::optional<Domain> domain = std::nullopt,
               double tol = 1e-10)
      : Ansatz(obs, domain ? *domain : Domain::spectral(obs)), b0_(std::move(b0)), b_(std::move(b)) {
    if (b_.size() != obs.size()) throw DimensionMismatch("LinearAnsatz: need one B_m per observable");
    std::vector<CMatrix> bs{b0_};
    bs.insert(bs.end(), b_.begin(), b_.end());
    std::vector<CMatrix> ps{CMatrix::Identity(obs.dim(), obs.dim())};
    ps.insert(ps.end(), obs.ops().begin(), obs.ops().end());
    for (std::size_t k = 0; k < bs.size(); ++k) {
      if (bs[k].rows() != obs.dim() || bs[k].cols() != obs.dim())
        throw DimensionMismatch("LinearAnsatz: B_k has the wrong dimension");
      if (!is_hermitian(bs[k], tol)) throw NotHermitian("LinearAnsatz: B_k is not Hermitian");
      for (std::size_t m = 0; m < ps.size(); ++m)
        if (std::abs((bs[k] * ps[m]).trace() - Complex(k == m ? 1.0 : 0.0)) > tol)
          throw BiorthogonalityViolation("LinearAnsatz: Tr(B_" + std::to_string(k) + " P_" + std::to_string(m) +
                                         ") differs from the Kronecker delta");
    }
  }

  std::string name() const override { return "linear"; }
  const CMatrix& b0() const { return b0_; }
  const std::vector<CMatrix>& b() const { return b_; }

  CMatrix eval(const RVec& e) const override {
    require_in_domain(e);
    CMatrix r = b0_;
    for (std::size_t m = 0; m < b_.size(); ++m) r += e(static_cast<Eigen::Index>(m)) * b_[m];
    return r;
  }
  std::vector<CMatrix> grad(const RVec& e) const override {
    require_in_domain(e);
    return b_;
  }

 private:
  CMatrix b0_;
  std::vector<CMatrix> b_;
};

/// Real function of one variable with its derivative.
struct ScalarFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  static ScalarFunction zero() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; }};
  }
  /// c·E²
  static ScalarFunction quadratic(double c) {
    return {[c](double e) { return c * e * e; }, [c](double e) { return 2.0 * c * e; }};
  }
  /// α√E
  static ScalarFunction alpha_sqrt(double alpha) {
    return {[alpha](double e) { return alpha * std::sqrt(e); },
            [alpha](double e) { return alpha / (2.0 * std::sqrt(e)); }};
  }
};

/// ρ = ½(I + Eσ_z + f(E)σ_x + g(E)σ_y), relevant observable σ_z.
class TwoLevelAnsatz final : public Ansatz {
 public:
  TwoLevelAnsatz(ScalarFunction f, ScalarFunction g, Domain domain, bool sqrt_coordinate = false)
      : Ansatz(RelevantObservables({pauli().z}), std::move(domain)),
        f_(std::move(f)),
        g_(std::move(g)),
        sqrt_coordinate_(sqrt_coordinate) {}

  /// g = α√E on 0 < E < upper; f defaults to zero.
  static std::shared_ptr<TwoLevelAnsatz> sqrt_family(double alpha, ScalarFunction f = ScalarFunction::zero(),
                                                     double upper = 0.9) {
    RVec lo(1), hi(1);
    lo << 0.0;
    hi << upper;
    return std::make_shared<TwoLevelAnsatz>(std::move(f), ScalarFunction::alpha_sqrt(alpha), Domain::box(lo, hi),
                                            alpha != 0.0);
  }

  std::string name() const override { return "two_level"; }
  bool sqrt_coordinate() const override { return sqrt_coordinate_; }
  const ScalarFunction& f() const { return f_; }
  const ScalarFunction& g() const { return g_; }

  CMatrix eval(const RVec& e) const override {
    check(e);
    const Pauli s = pauli();
    const double x = e(0);
    return 0.5 * (s.identity + x * s.z + f_.value(x) * s.x + g_.value(x) * s.y);
  }
  std::vector<CMatrix> grad(const RVec& e) const override {
    check(e);
    const Pauli s = pauli();
    const double x = e(0);
    return {0.5 * (s.z + f_.derivative(x) * s.x + g_.derivative(x) * s.y)};
  }

 private:
  void check(const RVec& e) const {
    require_in_domain(e);
    const double x = e(0), fx = f_.value(x), gx = g_.value(x);
    if (x * x + fx * fx + gx * gx > 1.0 + 1e-12)
      throw PositivityViolation("two_level: parameters leave the Bloch ball");
  }

  ScalarFunction f_, g_;
  bool sqrt_coordinate_;
};

/// Residuals of the consistency conditions and their derivatives at E.
struct ConsistencyReport {
  double trace = 0.0;           // |Tr ρ − 1|
  double averages = 0.0;        // ‖Tr(P ρ) − E‖∞
  double grad_averages = 0.0;   // max |Tr(P_m ∂_n ρ) − δ_mn|
  double grad_trace = 0.0;      // max |Tr ∂_n ρ|
};

inline ConsistencyReport consistency(const Ansatz& a, const RVec& e, const std::vector<CMatrix>& grad) {
  ConsistencyReport r;
  const CMatrix rho = a.eval(e);
  r.trace = std::abs(rho.trace() - 1.0);
  r.averages = (a.observables().traces(rho) - e.cast<Complex>()).cwiseAbs().maxCoeff();
  for (std::size_t n = 0; n < grad.size(); ++n) {
    r.grad_trace = std::max(r.grad_trace, std::abs(grad[n].trace()));
    for (std::size_t m = 0; m < a.size(); ++m)
      r.grad_averages =
          std::max(r.grad_averages, std::abs((a.observables()[m] * grad[n]).trace() - Complex(m == n ? 1.0 : 0.0)));
  }
  return r;
}

inline ConsistencyReport consistency(const Ansatz& a, const RVec& e) { return consistency(a, e, a.grad(e)); }

/// Uniform random point of the domain box, pulled inwards by `margin` of each width.
template <class Rng>
RVec random_domain_point(const Domain& d, Rng& rng, double margin = 0.05) {
  RVec e(d.lower.size());
  for (Eigen::Index m = 0; m < e.size(); ++m) {
    const double w = d.upper(m) - d.lower(m);
    e(m) = std::uniform_real_distribution<double>(d.lower(m) + margin * w, d.upper(m) - margin * w)(rng);
  }
  return e;
}

}  // namespace tclp

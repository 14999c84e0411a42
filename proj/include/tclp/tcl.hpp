#pragma once

// Time-local coefficients K(t), I(t): exact from the propagator, and the
// perturbative K_n, I_n assembled from signed composition sums of M-terms.

#include <string>
#include <vector>

#include "tclp/csv.hpp"
#include "tclp/fit.hpp"
#include "tclp/linalg.hpp"
#include "tclp/projectors.hpp"
#include "tclp/propagator.hpp"

namespace tclp {

struct TclCoefficients {
  std::vector<double> times;
  std::vector<SuperOperator> K, I;
  /// "exact" or "series:<n_max>".
  std::string order;
  /// Condition number of the restricted block at each time (exact only).
  std::vector<double> condition;
};

struct ExactOptions {
  RestrictedInverseOptions inverse;
  /// Drop the Ṗ terms (valid when Ṗ(t)ρ(t) = 0 along the trajectory).
  bool robertson = false;
};

/// K(t) and I(t) at one time from P, Ṗ, U and U̇.
inline std::pair<SuperOperator, SuperOperator> exact_coefficients_at(const SuperOperator& p, const SuperOperator& pdot,
                                                                     const SuperOperator& u, const SuperOperator& udot,
                                                                     double t, const ExactOptions& opts = {},
                                                                     double* condition = nullptr) {
  const SuperOperator q = SuperOperator::identity(p.dim()) - p;
  RestrictedInverse inv;
  try {
    inv = restricted_inverse_diagnostics(p * u * p, p, opts.inverse);
  } catch (const SingularOnRange& e) {
    throw SingularOnRange("exact_coefficients: P U P is not invertible on range(P) at t = " + std::to_string(t), t,
                          e.smallest_singular_value());
  }
  if (condition) *condition = inv.condition;
  const SuperOperator k = (pdot * u * p + p * udot * p) * inv.inverse;
  const SuperOperator i = pdot * u * q + p * udot * q - k * p * u * q;
  return {k, i};
}

/// Exact coefficients on the stored grid of `u`.
inline TclCoefficients exact_coefficients(const PropagatorGrid& u, const ProjectorFamily& family,
                                          const ExactOptions& opts = {}) {
  TclCoefficients out;
  out.order = "exact";
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double t = u.times()[i];
    double cond = 0.0;
    const SuperOperator pdot = opts.robertson ? SuperOperator::zero(family.dim()) : family.derivative(t);
    auto [k, in] = exact_coefficients_at(family(t), pdot, u[i], u.derivative_at(i), t, opts, &cond);
    out.times.push_back(t);
    out.K.push_back(std::move(k));
    out.I.push_back(std::move(in));
    out.condition.push_back(cond);
  }
  return out;
}

inline TclCoefficients exact_coefficients(const GeneratorFunction& l, double lambda, const ProjectorFamily& family,
                                          const std::vector<double>& times, const PropagationOptions& popts = {},
                                          const ExactOptions& opts = {}) {
  return exact_coefficients(transport_on(l, lambda, 0, times, popts).propagator, family, opts);
}

struct Composition {
  std::vector<int> parts;
  int sign = 1;  // (−1)^q with q + 1 = number of parts
};

/// All compositions of n, by number of parts, then lexicographically.
inline std::vector<Composition> compositions(int n) {
  if (n < 1) throw Error("compositions: n must be positive");
  std::vector<Composition> out;
  for (int parts = 1; parts <= n; ++parts) {
    std::vector<int> cur;
    auto rec = [&](auto&& self, int remaining, int slots) -> void {
      if (slots == 0) {
        if (remaining == 0) out.push_back({cur, (parts - 1) % 2 == 0 ? 1 : -1});
        return;
      }
      for (int k = 1; k <= remaining - (slots - 1); ++k) {
        cur.push_back(k);
        self(self, remaining - k, slots - 1);
        cur.pop_back();
      }
    };
    rec(rec, n, parts);
  }
  return out;
}

/// M_k, M̌_k, M̃_k and M̌̃_k at one time; index k = 1..k_max (index 0 unused).
struct MTerms {
  double t = 0.0;
  std::vector<SuperOperator> m, m_check, m_tilde, m_check_tilde;
  int k_max() const { return static_cast<int>(m.size()) - 1; }
};

inline MTerms m_terms(const SuperOperator& l, const SuperOperator& p, const SuperOperator& pdot,
                      const std::vector<SuperOperator>& g, double t, bool robertson = false) {
  MTerms out;
  out.t = t;
  const SuperOperator q = SuperOperator::identity(p.dim()) - p;
  const SuperOperator zero = SuperOperator::zero(p.dim());
  const int k_max = static_cast<int>(g.size()) - 1;
  out.m.assign(1, zero);
  out.m_check.assign(1, zero);
  out.m_tilde.assign(1, zero);
  out.m_check_tilde.assign(1, zero);
  const SuperOperator pl = p * l;
  for (int k = 1; k <= k_max; ++k) {
    const auto& gk = g[static_cast<std::size_t>(k)];
    const SuperOperator plg = pl * g[static_cast<std::size_t>(k - 1)];
    out.m.push_back(p * gk * p);
    out.m_tilde.push_back(p * gk * q);
    if (robertson) {
      out.m_check.push_back(plg * p);
      out.m_check_tilde.push_back(plg * q);
    } else {
      const SuperOperator pg = pdot * gk;
      out.m_check.push_back(pg * p + plg * p);
      out.m_check_tilde.push_back(pg * q + plg * q);
    }
  }
  return out;
}

inline MTerms m_terms(const GeneratorFunction& l, const ProjectorFamily& family, const IteratedIntegrals& g, double t,
                      bool robertson = false) {
  std::vector<SuperOperator> gs;
  for (int k = 0; k <= g.k_max(); ++k) gs.push_back(g.at(k, t));
  return m_terms(l(t), family(t), robertson ? SuperOperator::zero(family.dim()) : family.derivative(t), gs, t,
                 robertson);
}

/// K_n = Σ_compositions (−1)^q M̌_{k0} M_{k1} … M_{kq}.
inline SuperOperator perturbative_K(int n, const MTerms& m) {
  if (n < 1 || n > m.k_max()) throw Error("perturbative_K: order outside the available M-terms");
  SuperOperator sum = SuperOperator::zero(m.m[1].dim());
  for (const auto& c : compositions(n)) {
    SuperOperator term = m.m_check[static_cast<std::size_t>(c.parts[0])];
    for (std::size_t j = 1; j < c.parts.size(); ++j) term = term * m.m[static_cast<std::size_t>(c.parts[j])];
    sum += static_cast<double>(c.sign) * term;
  }
  return sum;
}

/// I_n = M̌̃_n + Σ_{q≥1} (−1)^q M̌_{k0} M_{k1} … M_{k_{q−1}} M̃_{kq}.
inline SuperOperator perturbative_I(int n, const MTerms& m) {
  if (n < 1 || n > m.k_max()) throw Error("perturbative_I: order outside the available M-terms");
  SuperOperator sum = SuperOperator::zero(m.m[1].dim());
  for (const auto& c : compositions(n)) {
    if (c.parts.size() == 1) {
      sum += m.m_check_tilde[static_cast<std::size_t>(n)];
      continue;
    }
    SuperOperator term = m.m_check[static_cast<std::size_t>(c.parts[0])];
    for (std::size_t j = 1; j + 1 < c.parts.size(); ++j) term = term * m.m[static_cast<std::size_t>(c.parts[j])];
    term = term * m.m_tilde[static_cast<std::size_t>(c.parts.back())];
    sum += static_cast<double>(c.sign) * term;
  }
  return sum;
}

/// Σ_{n ≤ n_max} λⁿ K_n and Σ λⁿ I_n on the grid of `g`.
inline TclCoefficients perturbative_coefficients(const GeneratorFunction& l, const ProjectorFamily& family,
                                                 const IteratedIntegrals& g, double lambda, int n_max,
                                                 bool robertson = false) {
  if (n_max < 1 || n_max > g.k_max()) throw Error("perturbative_coefficients: n_max exceeds the iterated integrals");
  TclCoefficients out;
  out.order = "series:" + std::to_string(n_max);
  for (double t : g.times()) {
    const MTerms m = m_terms(l, family, g, t, robertson);
    SuperOperator k = SuperOperator::zero(family.dim()), i = SuperOperator::zero(family.dim());
    double pow = 1.0;
    for (int n = 1; n <= n_max; ++n) {
      pow *= lambda;
      k += pow * perturbative_K(n, m);
      i += pow * perturbative_I(n, m);
    }
    out.times.push_back(t);
    out.K.push_back(std::move(k));
    out.I.push_back(std::move(i));
  }
  return out;
}

/// Human-readable structure of K_n or I_n, e.g. "+Mc3 -Mc1*M2 -Mc2*M1 +Mc1*M1*M1".
inline std::vector<std::string> expansion_terms(int n, bool inhomogeneity = false) {
  std::vector<std::string> out;
  for (const auto& c : compositions(n)) {
    std::string s = c.sign > 0 ? "+" : "-";
    if (inhomogeneity && c.parts.size() == 1) {
      out.push_back(s + "Mct" + std::to_string(n));
      continue;
    }
    s += "Mc" + std::to_string(c.parts[0]);
    for (std::size_t j = 1; j < c.parts.size(); ++j) {
      const bool last = inhomogeneity && j + 1 == c.parts.size();
      s += (last ? "*Mt" : "*M") + std::to_string(c.parts[j]);
    }
    out.push_back(s);
  }
  return out;
}

struct SeriesFitReport {
  int n_max = 0;
  std::vector<double> lambdas;
  std::vector<double> times;
  /// errors[t][λ] = ‖K_exact − Σ λⁿ K_n‖_F
  std::vector<std::vector<double>> errors;
  std::vector<LogLogFit> fits;  // per time
  double min_slope = 0.0, max_slope = 0.0, min_r_squared = 1.0;
};

/// Log-log slope of the truncation error of the K series, per time point.
/// t₀ is skipped: there K = λ P L P holds exactly and only round-off remains.
inline SeriesFitReport series_vs_exact(const GeneratorFunction& l, const std::vector<double>& lambdas,
                                       const ProjectorFamily& family, const std::vector<double>& times, int n_max,
                                       const PropagationOptions& popts = {}) {
  SeriesFitReport r;
  r.n_max = n_max;
  r.lambdas = lambdas;
  const Transport base = transport_on(l, 0.0, n_max, times, popts);
  std::vector<std::vector<double>> errs(times.size());
  for (double lambda : lambdas) {
    const TclCoefficients exact = exact_coefficients(l, lambda, family, times, popts);
    const TclCoefficients series = perturbative_coefficients(l, family, base.iterated, lambda, n_max);
    for (std::size_t i = 0; i < times.size(); ++i) errs[i].push_back((exact.K[i] - series.K[i]).norm());
  }
  bool first = true;
  for (std::size_t i = 1; i < times.size(); ++i) {
    bool positive = true;
    for (double e : errs[i]) positive = positive && e > 0.0;
    if (!positive) continue;
    const LogLogFit f = fit_loglog(lambdas, errs[i]);
    r.times.push_back(times[i]);
    r.errors.push_back(errs[i]);
    r.fits.push_back(f);
    r.min_slope = first ? f.slope : std::min(r.min_slope, f.slope);
    r.max_slope = first ? f.slope : std::max(r.max_slope, f.slope);
    r.min_r_squared = std::min(r.min_r_squared, f.r_squared);
    first = false;
  }
  return r;
}

/// Residual of d/dt(P ρ) = K P ρ + I Q(t) ρ(t₀) on a uniform grid, with the
/// time derivative from fourth-order central differences (interior points).
struct IdentityResidual {
  std::vector<double> times;
  std::vector<double> residual;
  double max = 0.0;
};

inline IdentityResidual theorem_identity_residual(const TclCoefficients& c, const PropagatorGrid& u,
                                                  const ProjectorFamily& family, const CMatrix& rho0) {
  const std::size_t n = u.size();
  if (n < 5 || c.times.size() != n) throw Error("theorem_identity_residual: need the same grid with >= 5 points");
  const double h = u.times()[1] - u.times()[0];
  std::vector<CMatrix> prho(n);
  for (std::size_t i = 0; i < n; ++i) prho[i] = family(u.times()[i]).apply(u[i].apply(rho0));
  IdentityResidual r;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double t = u.times()[i];
    const CMatrix lhs = (-prho[i + 2] + 8.0 * prho[i + 1] - 8.0 * prho[i - 1] + prho[i - 2]) / (12.0 * h);
    const CMatrix rhs = c.K[i].apply(prho[i]) + c.I[i].apply(family.complement(t).apply(rho0));
    r.times.push_back(t);
    r.residual.push_back(max_abs(lhs - rhs));
    r.max = std::max(r.max, r.residual.back());
  }
  return r;
}

/// CSV with columns t, then row-major Re/Im of the superoperator, then the order tag.
inline CsvTable coefficient_table(const TclCoefficients& c, bool inhomogeneity = false) {
  const auto& ops = inhomogeneity ? c.I : c.K;
  if (ops.empty()) return CsvTable({"t", "order"});
  const Eigen::Index n = ops.front().matrix().rows();
  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      header.push_back("re_" + std::to_string(i) + "_" + std::to_string(j));
      header.push_back("im_" + std::to_string(i) + "_" + std::to_string(j));
    }
  header.push_back("order");
  CsvTable table(header);
  for (std::size_t k = 0; k < ops.size(); ++k) {
    std::vector<CsvTable::Cell> row{c.times[k]};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        row.emplace_back(ops[k].matrix()(i, j).real());
        row.emplace_back(ops[k].matrix()(i, j).imag());
      }
    row.emplace_back(c.order);
    table.add_row(std::move(row));
  }
  return table;
}

}  // namespace tclp

#pragma once

// The acceptance checks, shared by tests/acceptance.cpp and `tclp verify`.

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tclp/docs_map.hpp"
#include "tclp/experiments.hpp"
#include "tclp/tcl.hpp"

namespace tclp {

struct VerifyOptions {
  std::uint64_t seed = 65;
  std::size_t jobs = 1;
  /// Source tree holding docs/, tests/ and include/.
  std::string root = TCLP_SOURCE_DIR;
  /// Empty: experiments write no CSV files.
  std::string out_dir;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Metric> metrics;
  double seconds = 0.0;
  double time_limit = 0.0;  // 0: none
  std::vector<std::string> notes;

  bool passed() const {
    if (metrics.empty()) return false;
    for (const auto& m : metrics)
      if (!m.passed()) return false;
    return time_limit <= 0.0 || seconds <= time_limit;
  }

  void add(std::string name, double value, double lower, double upper) {
    metrics.push_back({std::move(name), value, lower, upper, {}});
  }

  /// One line: "criterion N <title>: PASS|FAIL (m=v, ...; 1.2 s)".
  std::string line() const {
    std::string s = "criterion " + std::to_string(id) + " " + title + ": " + (passed() ? "PASS" : "FAIL") + " (";
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      const auto& m = metrics[i];
      s += (i ? ", " : "") + m.name + "=" + fmt::format("{:.4g}", m.value);
      if (!m.passed()) s += " outside " + m.tolerance();
    }
    s += fmt::format("; {:.1f} s", seconds);
    if (time_limit > 0.0 && seconds > time_limit) s += fmt::format(" > {:.0f} s", time_limit);
    return s + ")";
  }
};

namespace detail {

/// Unit-trace Hermitian matrix with prescribed averages: ρ_ans(E) plus a
/// traceless perturbation orthogonal to every relevant observable.
inline CMatrix state_with_averages(const Ansatz& a, const RVec& e, std::mt19937_64& rng, double size = 0.1) {
  const Eigen::Index d = a.dim();
  std::normal_distribution<double> n01(0.0, 1.0);
  CMatrix x(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = Complex(n01(rng), n01(rng));
  x = 0.5 * (x + x.adjoint()).eval();
  std::vector<CMatrix> q{CMatrix::Identity(d, d)};
  for (std::size_t m = 0; m < a.observables().size(); ++m) q.push_back(a.observables()[m]);
  const auto k = static_cast<Eigen::Index>(q.size());
  Eigen::MatrixXd g(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    b(i) = hs_inner(q[static_cast<std::size_t>(i)], x).real();
    for (Eigen::Index j = 0; j < k; ++j)
      g(i, j) = hs_inner(q[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(j)]).real();
  }
  const Eigen::VectorXd c = g.ldlt().solve(b);
  for (Eigen::Index i = 0; i < k; ++i) x -= c(i) * q[static_cast<std::size_t>(i)];
  return a.eval(e) + (size / max_abs(x)) * x;
}

inline RelevantObservables pauli_subset(const std::string& axes) {
  const Pauli s = pauli();
  std::vector<CMatrix> ops;
  for (char c : axes) ops.push_back(c == 'x' ? s.x : c == 'y' ? s.y : s.z);
  return RelevantObservables(ops);
}

template <class F>
CriterionResult timed(int id, std::string title, double limit, F body) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  r.time_limit = limit;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.notes.push_back(std::string("error: ") + e.what());
    r.add("completed", 0.0, 1.0, 1.0);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline void add_metrics(CriterionResult& r, const ExperimentReport& rep, const std::vector<std::string>& names) {
  for (const auto& n : names) r.metrics.push_back(rep.metric(n));
}

}  // namespace detail

/// Idempotency, P(E)P(E′) = P(E) and P_NL(ρ)ρ = ρ_ans(Tr P⃗ρ) over random samples.
inline CriterionResult verify_projector_laws(const VerifyOptions& o) {
  return detail::timed(1, "projector laws", 30.0, [&](CriterionResult& r) {
    std::mt19937_64 rng(o.seed);
    const auto gm = gell_mann_basis(3);
    const std::vector<std::pair<std::string, AnsatzPtr>> families{
        {"gibbs_xz", std::make_shared<GibbsAnsatz>(detail::pauli_subset("xz"))},
        {"gibbs_qutrit", std::make_shared<GibbsAnsatz>(RelevantObservables({gm[1], gm[3], gm[7]}))},
        {"renyi_xz", std::make_shared<RenyiAnsatz>(2.0, detail::pauli_subset("xz"))},
        {"renyi_qutrit", std::make_shared<RenyiAnsatz>(2.0, RelevantObservables({gm[2], gm[8]}))},
        {"linear_xz", bloch_linear_ansatz("xz", 0.7)},
        {"sqrt", TwoLevelAnsatz::sqrt_family(0.4)},
        {"two_level_quadratic", TwoLevelAnsatz::sqrt_family(0.3, ScalarFunction::quadratic(0.2))}};
    const int per_family = 20;
    double idem = 0.0, comp = 0.0, onto = 0.0;
    std::size_t samples = 0;
    for (const auto& [name, a] : families) {
      // the box around non-commuting qutrit observables is larger than their
      // joint range, so those samples stay near its centre
      const double margin = a->dim() > 2 ? 0.3 : 0.05;
      for (int k = 0; k < per_family; ++k) {
        const RVec e = random_domain_point(a->domain(), rng, margin);
        const RVec e2 = random_domain_point(a->domain(), rng, margin);
        const RVec e3 = random_domain_point(a->domain(), rng, margin);
        const auto laws = check_projector_laws(*a, {{e, e2}});
        idem = std::max(idem, laws.idempotency);
        comp = std::max(comp, laws.composition);
        const CMatrix rho = detail::state_with_averages(*a, e3, rng);
        onto = std::max(onto, max_abs(kg_nonlinear(*a, rho).apply(rho) - a->eval(a->observables().averages(rho))));
        ++samples;
      }
    }
    r.add("samples", static_cast<double>(samples), 100.0, std::numeric_limits<double>::infinity());
    r.add("idempotency", idem, 0.0, 1e-9);
    r.add("composition", comp, 0.0, 1e-8);
    r.add("nonlinear_onto_ansatz", onto, 0.0, 1e-9);
  });
}

/// ‖Ṗ_KG(t)ρ(t)‖ along the exact resonance-fluorescence trajectory.
inline CriterionResult verify_robertson(const VerifyOptions&) {
  return detail::timed(2, "robertson condition", 0.0, [&](CriterionResult& r) {
    const auto a = TwoLevelAnsatz::sqrt_family(0.4);
    const auto rf = resonance_fluorescence({});
    PropagationOptions po;
    po.grid_points = 257;
    const auto u = propagate(rf.generator, 0.1, 0.0, 3.0, po);
    const auto traj = trajectory_from(u, a->eval(RVec::Constant(1, 0.25)));
    const auto fam = kg_time_dependent(a, traj);
    double worst = 0.0;
    for (double t : uniform_grid(0.0, 3.0, 50)) worst = std::max(worst, fam.derivative(t).apply(traj.state(t)).norm());
    r.add("max_norm", worst, 0.0, 1e-6);
  });
}

/// Residual of the exact time-local equation on the grid.
inline CriterionResult verify_kinetic_identity(const VerifyOptions& o) {
  return detail::timed(3, "time-local identity", 60.0, [&](CriterionResult& r) {
    const auto rf = resonance_fluorescence({});
    PropagationOptions po;
    po.grid_points = 257;
    const auto u = propagate(rf.generator, 0.1, 0.0, 3.0, po);
    std::mt19937_64 rng(o.seed);
    const auto lin = bloch_linear_ansatz("xz");
    const auto constant = constant_projector(kg_parametric(*lin, RVec::Zero(2)));
    const CMatrix rho0 = detail::state_with_averages(*lin, RVec::Constant(2, 0.2), rng);
    r.add("constant_linear", theorem_identity_residual(exact_coefficients(u, constant), u, constant, rho0).max, 0.0,
          1e-7);
    const auto a = TwoLevelAnsatz::sqrt_family(0.4);
    const CMatrix start = a->eval(RVec::Constant(1, 0.25));
    const auto kg = kg_time_dependent(a, trajectory_from(u, start));
    r.add("kawasaki_gunton_sqrt", theorem_identity_residual(exact_coefficients(u, kg), u, kg, start).max, 0.0, 1e-7);
  });
}

/// Truncation error of the K series against the exact K, orders 1 to 3.
inline CriterionResult verify_series_orders(const VerifyOptions& o) {
  return detail::timed(4, "series orders", 120.0, [&](CriterionResult& r) {
    std::mt19937_64 rng(o.seed);
    const auto l = interaction_picture(random_gksl(2, rng, 2, 0.3), random_gksl(2, rng, 2, 0.3));
    const Pauli s = pauli();
    const auto a = std::make_shared<LinearAnsatz>(0.5 * s.identity + 0.1 * s.x,
                                                  std::vector<CMatrix>{0.5 * s.z + 0.2 * s.y},
                                                  RelevantObservables({s.z}));
    const auto fam = constant_projector(kg_parametric(*a, RVec::Zero(1)));
    const auto times = uniform_grid(0.0, 1.0, 9);
    PropagationOptions po;
    po.grid_points = 9;
    const std::vector<double> lambdas = geometric_grid(0.05, 0.2, 5);
    for (int n = 1; n <= 3; ++n) {
      const auto rep = series_vs_exact(l, lambdas, fam, times, n, po);
      r.add("order" + std::to_string(n) + "_min_slope", rep.min_slope, n + 0.8, n + 1.2);
      r.add("order" + std::to_string(n) + "_max_slope", rep.max_slope, n + 0.8, n + 1.2);
    }
    r.notes.push_back("random model seed " + std::to_string(o.seed));
  });
}

inline CriterionResult verify_linear_example(const VerifyOptions& o) {
  return detail::timed(5, "linear example", 120.0, [&](CriterionResult& r) {
    const auto rep = run_error_scaling(ErrorScalingParams{}, {o.out_dir, "", o.jobs});
    detail::add_metrics(r, rep, {"ex_max_error", "ez_slope", "ez_coefficient_relative_gap"});
  });
}

inline CriterionResult verify_nonlinear_example(const VerifyOptions& o) {
  return detail::timed(6, "nonlinear example", 120.0, [&](CriterionResult& r) {
    const auto rep = run_nonlinear_example(NonlinearParams{}, {o.out_dir, "", o.jobs});
    detail::add_metrics(r, rep, {"closed_form_max_gap", "minus_branch_slope", "plus_branch_slope", "f_invariance_gap"});
  });
}

inline CriterionResult verify_wick_rotation(const VerifyOptions& o) {
  return detail::timed(7, "wick rotation", 120.0, [&](CriterionResult& r) {
    const auto rep = run_wick_rotation(WickParams{}, {o.out_dir, "", o.jobs});
    detail::add_metrics(r, rep, {"scaled_gap_max_increase", "exact_limit_gap"});
    // reported alongside: observed order of the exact gap
    r.notes.push_back("exact_gap_slope " + format_number(rep.metric("exact_gap_slope").value));
  });
}

/// Gibbs and Rényi families over the same Pauli subset give the same state.
inline CriterionResult verify_collapse(const VerifyOptions& o) {
  return detail::timed(8, "qubit family collapse", 0.0, [&](CriterionResult& r) {
    std::mt19937_64 rng(o.seed);
    double worst = 0.0;
    for (const std::string axes : {"x", "z", "xz", "yz", "xyz"}) {
      GibbsAnsatz g(detail::pauli_subset(axes));
      for (int k = 0; k < 10; ++k) {
        const RVec e = random_domain_point(g.domain(), rng);
        for (double q : {0.5, 2.0, 5.0})
          worst = std::max(worst, max_abs(RenyiAnsatz(q, detail::pauli_subset(axes)).eval(e) - g.eval(e)));
      }
    }
    r.add("max_difference", worst, 0.0, 1e-8);
  });
}

inline CriterionResult verify_coverage(const VerifyOptions& o) {
  return detail::timed(9, "coverage map", 0.0, [&](CriterionResult& r) {
    const auto rep = check_map_completeness(o.root);
    r.add("problems", static_cast<double>(rep.problems.size()), 0.0, 0.0);
    r.add("entries", static_cast<double>(rep.entries), static_cast<double>(required_anchors().size()),
          std::numeric_limits<double>::infinity());
    r.notes = rep.problems;
  });
}

inline std::vector<std::function<CriterionResult(const VerifyOptions&)>> acceptance_checks() {
  return {verify_projector_laws, verify_robertson,        verify_kinetic_identity,
          verify_series_orders,  verify_linear_example,   verify_nonlinear_example,
          verify_wick_rotation,  verify_collapse,         verify_coverage};
}

/// criterion,title,metric,value,lower,upper,status
inline CsvTable verification_summary(const std::vector<CriterionResult>& results) {
  CsvTable t({"criterion", "title", "metric", "value", "lower", "upper", "status"});
  for (const auto& r : results) {
    for (const auto& m : r.metrics)
      t.add_row({static_cast<double>(r.id), r.title, m.name, m.value, m.lower, m.upper,
                 std::string(m.passed() ? "pass" : "fail")});
    t.add_row({static_cast<double>(r.id), r.title, std::string("seconds"), r.seconds, 0.0,
               r.time_limit > 0.0 ? r.time_limit : std::numeric_limits<double>::infinity(),
               std::string(r.time_limit <= 0.0 || r.seconds <= r.time_limit ? "pass" : "fail")});
  }
  return t;
}

}  // namespace tclp

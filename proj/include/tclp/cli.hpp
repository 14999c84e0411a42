#pragma once

// Command dispatch behind the tclp executable. Every command returns 0 iff all
// of its tolerances pass; failures are listed one per line as
//
//   FAIL <scope>=<name> metric=<metric> value=<v> bound=[lo, hi]

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tclp/config.hpp"
#include "tclp/experiments.hpp"
#include "tclp/kg_dynamics.hpp"
#include "tclp/tcl.hpp"
#include "tclp/verification.hpp"

namespace tclp {

struct CliOptions {
  /// Command-line overrides; unset values come from the config.
  std::optional<std::string> out_dir;
  std::optional<int> order;
  std::uint64_t seed = 65;
  std::size_t jobs = 1;
};

namespace detail {

inline std::string subscript(const std::string& digits) {
  static const char* const sub[] = {"₀", "₁", "₂", "₃", "₄", "₅", "₆", "₇", "₈", "₉"};
  std::string out;
  for (char c : digits) out += sub[c - '0'];
  return out;
}

inline std::string failure_line(const std::string& scope, const std::string& name, const Metric& m) {
  return fmt::format("FAIL {}={} metric={} value={} bound={}", scope, name, m.name, format_number(m.value),
                     m.tolerance());
}

inline std::string out_dir(const RunConfig& c, const CliOptions& o) {
  return o.out_dir ? *o.out_dir : c.output.directory;
}

/// Prints the report and its failures; returns the exit status.
inline int finish(const ExperimentReport& r, std::ostream& out) {
  out << r.name << ": " << (r.passed() ? "PASS" : "FAIL") << "\n";
  for (const auto& [k, v] : r.parameters) out << "  " << k << " = " << v << "\n";
  for (const auto& m : r.metrics)
    out << "  " << m.name << " = " << format_number(m.value) << " " << m.tolerance() << (m.passed() ? "" : " FAIL")
        << "\n";
  for (const auto& f : r.files) out << "  wrote " << f << "\n";
  for (const auto& m : r.metrics)
    if (!m.passed()) out << failure_line("experiment", r.name, m) << "\n";
  if (r.metrics.empty()) out << "FAIL experiment=" << r.name << " metric=none\n";
  return r.passed() ? 0 : 1;
}

}  // namespace detail

/// "+Mc1*M2" → "+M̌₁M₂"; Mt is M̃ and Mct is M̌̃, minus signs become U+2212.
inline std::string pretty_term(const std::string& ascii) {
  std::string out;
  std::size_t i = 0;
  while (i < ascii.size()) {
    const char c = ascii[i];
    if (c == '+') {
      out += "+";
      ++i;
    } else if (c == '-') {
      out += "−";
      ++i;
    } else if (c == '*') {
      ++i;
    } else if (c == 'M') {
      ++i;
      std::string mark;
      if (i < ascii.size() && ascii[i] == 'c') mark += "̌", ++i;
      if (i < ascii.size() && ascii[i] == 't') mark += "̃", ++i;
      std::string digits;
      while (i < ascii.size() && std::isdigit(static_cast<unsigned char>(ascii[i]))) digits += ascii[i++];
      out += "M" + mark + detail::subscript(digits);
    } else {
      throw ParseError("pretty_term: unexpected character in " + ascii, 0);
    }
  }
  return out;
}

inline std::string expansion_text(int n, bool inhomogeneity) {
  std::string s;
  for (const auto& t : expansion_terms(n, inhomogeneity)) s += (s.empty() ? "" : " ") + pretty_term(t);
  return s;
}

inline int cmd_expand(int n, std::ostream& out) {
  if (n < 1) throw ValidationError("expand: order must be at least 1", "order");
  out << "K" << detail::subscript(std::to_string(n)) << " = " << expansion_text(n, false) << "\n";
  out << "I" << detail::subscript(std::to_string(n)) << " = " << expansion_text(n, true) << "\n";
  return 0;
}

inline ExperimentReport run_example(const std::string& name, const RunConfig& c, const CliOptions& o) {
  const ExperimentOptions eo{detail::out_dir(c, o), c.output.prefix, o.jobs};
  if (name == "error-scaling") return run_error_scaling(error_scaling_params(c), eo);
  if (name == "wick-rotation") return run_wick_rotation(wick_params(c), eo);
  if (name == "nonlinear") return run_nonlinear_example(nonlinear_params(c), eo);
  throw ValidationError("run-example: unknown example '" + name + "'", "example");
}

/// Initial averages for the configured ansatz: e0 for one-component families,
/// otherwise ex0/ez0 per Pauli axis (0 for y).
inline RVec initial_averages(const RunConfig& c, const Ansatz& a) {
  if (a.size() == 1) return RVec::Constant(1, c.model.e0);
  RVec e(static_cast<Eigen::Index>(c.projector.axes.size()));
  for (std::size_t k = 0; k < c.projector.axes.size(); ++k) {
    const char axis = c.projector.axes[k];
    e(static_cast<Eigen::Index>(k)) = axis == 'x' ? c.model.ex0 : axis == 'z' ? c.model.ez0 : 0.0;
  }
  return e;
}

/// λ scan of the mean equation for the configured ansatz against exact
/// propagation; the error is sup over t and components.
inline ExperimentReport run_sweep(const RunConfig& c, const CliOptions& o) {
  const auto a = make_ansatz(c);
  const bool linear = c.projector.ansatz == "linear";
  if (c.projector.kind != "kawasaki_gunton" && !linear)
    throw ValidationError("sweep: a constant projector needs the linear ansatz", "projector.kind");
  const int order = o.order.value_or(c.solver.order);
  if (order != 1 && order != 2) throw ValidationError("sweep: order must be 1 or 2", "order");
  const std::vector<double> lambdas = c.model.lambda_list.empty() ? default_lambda_sweep() : c.model.lambda_list;
  if (lambdas.size() < 2) throw ValidationError("sweep: need at least two lambdas", "model.lambda_list");

  ExperimentReport r;
  r.name = "sweep";
  const auto model = c.rf_params();
  const auto rf = resonance_fluorescence(model);
  const double t0 = c.solver.t0, t_max = c.horizon();
  r.param("ansatz", a->name());
  r.param("axes", c.projector.axes);
  r.param("order", static_cast<double>(order));
  r.param("t0", t0);
  r.param("t_max", t_max);

  const auto times = uniform_grid(t0, t_max, c.solver.grid_points);
  const RVec e0 = initial_averages(c, *a);
  const CMatrix rho0 = a->eval(e0);
  // the oracle integrates the rotating-frame state, e^{L₀t₀} ρ(t₀)
  const CMatrix rot0 = devectorize(CVector(expm(CMatrix(t0 * rf.free.matrix())) * vectorize(rho0)), a->dim());
  MeanOptions mo;
  mo.order = order;
  mo.ode = OdeOptions{c.solver.rel_tol, c.solver.abs_tol};
  const auto errors = detail::parallel_map(lambdas.size(), o.jobs, [&](std::size_t i) {
    const auto mean = solve_mean(a, rf.generator, lambdas[i], e0, times, mo);
    const auto exact = exact_oracle(model, lambdas[i], rot0, a->observables(), times);
    double worst = 0.0;
    for (Eigen::Index m = 0; m < e0.size(); ++m) {
      const double gap = detail::sup_abs_diff(mean.component(m), exact.component(m));
      worst = std::isfinite(gap) ? std::max(worst, gap) : gap;
      if (!std::isfinite(worst)) break;
    }
    return worst;
  });

  CsvTable table({"lambda", "sup_error"});
  for (std::size_t i = 0; i < lambdas.size(); ++i) table.add_row({lambdas[i], errors[i]});
  const std::string file = detail::emit(r, {detail::out_dir(c, o), c.output.prefix, o.jobs}, "errors", table);
  bool positive = true;
  for (double e : errors) positive = positive && std::isfinite(e) && e > 0.0;
  const LogLogFit fit = positive ? fit_loglog(lambdas, errors) : LogLogFit{std::nan(""), 0.0, 0.0, 0};
  r.add("error_slope", fit.slope, c.solver.slope_min, c.solver.slope_max, file);
  return r;
}

inline int cmd_verify(const CliOptions& o, const RunConfig& c, std::ostream& out) {
  VerifyOptions vo;
  vo.seed = o.seed;
  vo.jobs = o.jobs;
  vo.out_dir = detail::out_dir(c, o);
  out << "seed " << vo.seed << "\n";
  std::vector<CriterionResult> results;
  for (const auto& check : acceptance_checks()) {
    results.push_back(check(vo));
    out << results.back().line() << "\n";
    for (const auto& n : results.back().notes) out << "    " << n << "\n";
  }
  std::filesystem::create_directories(vo.out_dir);
  const auto path = (std::filesystem::path(vo.out_dir) / (c.output.prefix + "verify_summary.csv")).string();
  verification_summary(results).write(path);
  out << "wrote " << path << "\n";
  int status = 0;
  for (const auto& r : results) {
    for (const auto& m : r.metrics)
      if (!m.passed()) out << detail::failure_line("criterion", std::to_string(r.id), m) << "\n";
    if (r.time_limit > 0.0 && r.seconds > r.time_limit)
      out << detail::failure_line("criterion", std::to_string(r.id), {"seconds", r.seconds, 0.0, r.time_limit, {}})
          << "\n";
    if (!r.passed()) status = 1;
  }
  return status;
}

/// Runs one command; `args` holds the positional arguments after it.
inline int dispatch(const std::string& command, const std::vector<std::string>& args, const RunConfig& c,
                    const CliOptions& o, std::ostream& out) {
  if (command == "expand") return cmd_expand(o.order.value_or(c.solver.n_max), out);
  if (command == "run-example") {
    if (args.size() != 1) throw ValidationError("run-example: expected one example name", "example");
    return detail::finish(run_example(args.front(), c, o), out);
  }
  if (command == "sweep") return detail::finish(run_sweep(c, o), out);
  if (command == "verify") return cmd_verify(o, c, out);
  throw ValidationError("unknown command '" + command + "'", "command");
}

}  // namespace tclp

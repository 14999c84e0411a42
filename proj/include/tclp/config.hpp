#pragma once

// INI run configuration with four sections: model, projector, solver, output.
// Unknown sections or keys are errors. Any key can be overridden from the
// environment as TCLP_<SECTION>_<KEY>, e.g. TCLP_MODEL_OMEGA=0.5.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tclp/ansatz.hpp"
#include "tclp/errors.hpp"
#include "tclp/experiments.hpp"
#include "tclp/text.hpp"

namespace tclp {

struct RunConfig {
  struct Model {
    std::string kind = "resonance_fluorescence";
    double omega = 1.0;
    double gamma0 = 1.0;
    double n_thermal = 0.0;
    /// Unset: each experiment uses its own choice (only the nonlinear example
    /// runs with the high-temperature generator).
    std::optional<bool> high_temperature;
    double lambda = 0.1;
    /// Empty when not configured; experiments then use their own sweeps.
    std::vector<double> lambda_list;
    double ex0 = 0.3, ez0 = 0.5, e0 = 0.25;
  } model;

  struct Projector {
    std::string kind = "kawasaki_gunton";
    /// sqrt | two_level | linear | gibbs | renyi
    std::string ansatz = "sqrt";
    double alpha = 0.4;
    /// f selector for the two-level families: zero | quadratic
    std::string f = "zero";
    double f_coefficient = 0.1;
    double q = 2.0;
    /// Pauli axes for linear, gibbs and renyi
    std::string axes = "xz";
  } projector;

  struct Solver {
    double rel_tol = 1e-12, abs_tol = 1e-14;
    std::size_t grid_points = 151;
    double t0 = 0.0;
    /// 0 selects 3/|γ|
    double t_max = 0.0;
    int order = 2;
    int n_max = 3;
    double slope_min = -std::numeric_limits<double>::infinity();
    double slope_max = std::numeric_limits<double>::infinity();
  } solver;

  struct Output {
    std::string directory = "out";
    std::string prefix;
  } output;

  ResonanceFluorescenceParams rf_params(bool high_temperature_default = false) const {
    return {model.omega, model.gamma0, model.n_thermal, model.high_temperature.value_or(high_temperature_default)};
  }
  double horizon() const { return solver.t_max > 0.0 ? solver.t_max : 3.0 / std::abs(rf_params().gamma()); }
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline double parse_double(const std::string& text, const std::string& key, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ParseError("config: '" + text + "' is not a number", line, key);
  }
  if (detail::trim(text.substr(used)).size()) throw ParseError("config: trailing text after number '" + text + "'", line, key);
  return v;
}

inline std::vector<double> parse_list(std::string text, const std::string& key, std::size_t line) {
  text = detail::trim(text);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw ParseError("config: unterminated list", line, key);
    text = text.substr(1, text.size() - 2);
  }
  std::vector<double> out;
  if (detail::trim(text).empty()) return out;
  for (const auto& cell : split(text, ',')) out.push_back(parse_double(cell, key, line));
  return out;
}

inline bool parse_bool(const std::string& text, const std::string& key, std::size_t line) {
  const std::string t = lower(detail::trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ParseError("config: '" + text + "' is not a boolean", line, key);
}

/// Line of `key` inside `[section]`, 0 when unknown (e.g. environment values).
inline std::size_t locate_key(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string raw, current;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.size() > 1 && s.front() == '[' && s.back() == ']') {
      current = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (current == section && eq != std::string::npos && trim(s.substr(0, eq)) == key) return line;
  }
  return 0;
}

}  // namespace detail

/// Parses configuration text. `source` names the origin in error messages.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config",
                                   const std::function<const char*(const char*)>& getenv = [](const char* n) {
                                     return std::getenv(n);
                                   }) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ParseError(source + ": " + e.message(), e.line());
    }
  }

  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&, std::size_t)>;
  auto num = [](double& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& k, std::size_t l) { dst = detail::parse_double(v, k, l); };
  };
  auto count = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& k, std::size_t l) {
      const double x = detail::parse_double(v, k, l);
      if (x < 0 || x != std::floor(x)) throw ValidationError("config: " + k + " must be a non-negative integer", k);
      dst = static_cast<std::size_t>(x);
    };
  };
  auto integer = [](int& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& k, std::size_t l) {
      const double x = detail::parse_double(v, k, l);
      if (x != std::floor(x)) throw ValidationError("config: " + k + " must be an integer", k);
      dst = static_cast<int>(x);
    };
  };
  auto word = [](std::string& dst) -> Setter {
    return [&dst](const std::string& v, const std::string&, std::size_t) { dst = detail::trim(v); };
  };
  auto flag = [](std::optional<bool>& dst) -> Setter {
    return [&dst](const std::string& v, const std::string& k, std::size_t l) { dst = detail::parse_bool(v, k, l); };
  };

  const std::map<std::string, std::map<std::string, Setter>> schema{
      {"model",
       {{"kind", word(c.model.kind)},
        {"omega", num(c.model.omega)},
        {"gamma0", num(c.model.gamma0)},
        {"n_thermal", num(c.model.n_thermal)},
        {"high_temperature", flag(c.model.high_temperature)},
        {"lambda", num(c.model.lambda)},
        {"lambda_list",
         [&](const std::string& v, const std::string& k, std::size_t l) {
           c.model.lambda_list = detail::parse_list(v, k, l);
           if (c.model.lambda_list.empty()) throw ValidationError("config: model.lambda_list is empty", k);
         }},
        {"ex0", num(c.model.ex0)},
        {"ez0", num(c.model.ez0)},
        {"e0", num(c.model.e0)}}},
      {"projector",
       {{"kind", word(c.projector.kind)},
        {"ansatz", word(c.projector.ansatz)},
        {"alpha", num(c.projector.alpha)},
        {"f", word(c.projector.f)},
        {"f_coefficient", num(c.projector.f_coefficient)},
        {"q", num(c.projector.q)},
        {"axes", word(c.projector.axes)}}},
      {"solver",
       {{"rel_tol", num(c.solver.rel_tol)},
        {"abs_tol", num(c.solver.abs_tol)},
        {"grid_points", count(c.solver.grid_points)},
        {"t0", num(c.solver.t0)},
        {"t_max", num(c.solver.t_max)},
        {"order", integer(c.solver.order)},
        {"n_max", integer(c.solver.n_max)},
        {"slope_min", num(c.solver.slope_min)},
        {"slope_max", num(c.solver.slope_max)}}},
      {"output", {{"directory", word(c.output.directory)}, {"prefix", word(c.output.prefix)}}}};

  for (const auto& [section, body] : tree) {
    const auto s = schema.find(section);
    if (s == schema.end()) {
      if (body.empty() && !body.data().empty())
        throw ValidationError(source + ": key '" + section + "' outside any section", section);
      throw ValidationError(source + ": unknown section [" + section + "]", section);
    }
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const auto k = s->second.find(key);
      if (k == s->second.end()) throw ValidationError(source + ": unknown key " + field, field);
      k->second(value.data(), field, detail::locate_key(text, section, key));
    }
  }
  for (const auto& [section, keys] : schema)
    for (const auto& [key, set] : keys) {
      const std::string name = "TCLP_" + detail::upper(section) + "_" + detail::upper(key);
      if (const char* v = getenv(name.c_str())) set(v, section + "." + key, 0);
    }

  auto require = [](bool ok, const std::string& what, const std::string& field) {
    if (!ok) throw ValidationError("config: " + what, field);
  };
  auto finite = [&](double v, const std::string& field) { require(std::isfinite(v), field + " must be finite", field); };
  require(c.model.kind == "resonance_fluorescence", "unknown model kind '" + c.model.kind + "'", "model.kind");
  for (auto [v, f] : {std::pair{c.model.omega, "model.omega"}, {c.model.gamma0, "model.gamma0"},
                      {c.model.n_thermal, "model.n_thermal"}, {c.model.lambda, "model.lambda"},
                      {c.model.ex0, "model.ex0"}, {c.model.ez0, "model.ez0"}, {c.model.e0, "model.e0"},
                      {c.projector.alpha, "projector.alpha"}, {c.projector.f_coefficient, "projector.f_coefficient"},
                      {c.projector.q, "projector.q"}, {c.solver.t0, "solver.t0"}, {c.solver.t_max, "solver.t_max"},
                      {c.solver.rel_tol, "solver.rel_tol"}, {c.solver.abs_tol, "solver.abs_tol"}})
    finite(v, f);
  for (double l : c.model.lambda_list) finite(l, "model.lambda_list");
  require(c.model.gamma0 != 0.0, "gamma0 must be nonzero", "model.gamma0");
  require(c.model.n_thermal >= 0.0, "n_thermal must be non-negative", "model.n_thermal");
  require(c.projector.kind == "kawasaki_gunton" || c.projector.kind == "constant",
          "unknown projector kind '" + c.projector.kind + "'", "projector.kind");
  const std::vector<std::string> ansatzes{"sqrt", "two_level", "linear", "gibbs", "renyi"};
  require(std::find(ansatzes.begin(), ansatzes.end(), c.projector.ansatz) != ansatzes.end(),
          "unknown ansatz '" + c.projector.ansatz + "'", "projector.ansatz");
  require(c.projector.f == "zero" || c.projector.f == "quadratic", "unknown f selector '" + c.projector.f + "'",
          "projector.f");
  require(c.projector.q > 0.0 && c.projector.q != 1.0, "q must be positive and differ from 1", "projector.q");
  require(!c.projector.axes.empty() && c.projector.axes.find_first_not_of("xyz") == std::string::npos,
          "axes must be drawn from xyz", "projector.axes");
  require(c.solver.rel_tol > 0.0 && c.solver.abs_tol > 0.0, "tolerances must be positive", "solver.rel_tol");
  require(c.solver.grid_points >= 2, "grid_points must be at least 2", "solver.grid_points");
  require(c.solver.t_max == 0.0 || c.solver.t_max > c.solver.t0, "t_max must exceed t0 (or be 0)", "solver.t_max");
  require(c.solver.order == 1 || c.solver.order == 2, "order must be 1 or 2", "solver.order");
  require(c.solver.n_max >= 1, "n_max must be at least 1", "solver.n_max");
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("config: cannot open " + path, 0);
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config_text(s.str(), path);
}

/// Ansatz selected by the projector section.
inline AnsatzPtr make_ansatz(const RunConfig& c) {
  const auto& p = c.projector;
  const ScalarFunction f = p.f == "quadratic" ? ScalarFunction::quadratic(p.f_coefficient) : ScalarFunction::zero();
  if (p.ansatz == "sqrt") return TwoLevelAnsatz::sqrt_family(p.alpha, f);
  if (p.ansatz == "two_level") return TwoLevelAnsatz::sqrt_family(0.0, f);
  if (p.ansatz == "linear") return bloch_linear_ansatz(p.axes);
  std::vector<CMatrix> obs;
  const Pauli s = pauli();
  for (char a : p.axes) obs.push_back(a == 'x' ? s.x : a == 'y' ? s.y : s.z);
  if (p.ansatz == "gibbs") return std::make_shared<GibbsAnsatz>(RelevantObservables(obs));
  return std::make_shared<RenyiAnsatz>(p.q, RelevantObservables(obs));
}

inline ErrorScalingParams error_scaling_params(const RunConfig& c) {
  ErrorScalingParams p;
  p.model = c.rf_params();
  if (!c.model.lambda_list.empty()) p.lambdas = c.model.lambda_list;
  p.t_max = c.solver.t_max;
  p.ex0 = c.model.ex0;
  p.ez0 = c.model.ez0;
  p.grid_points = c.solver.grid_points;
  return p;
}

inline WickParams wick_params(const RunConfig& c) {
  WickParams p;
  p.model = c.rf_params();
  if (!c.model.lambda_list.empty()) p.lambdas = c.model.lambda_list;
  p.t_max = c.solver.t_max;
  p.ex0 = c.model.ex0;
  p.ez0 = c.model.ez0;
  return p;
}

inline NonlinearParams nonlinear_params(const RunConfig& c) {
  NonlinearParams p;
  p.model = c.rf_params(true);
  p.alpha = c.projector.alpha;
  p.e0 = c.model.e0;
  if (!c.model.lambda_list.empty()) p.lambdas = c.model.lambda_list;
  p.t_max = c.solver.t_max;
  p.f_coefficient = c.projector.f_coefficient;
  p.grid_points = c.solver.grid_points;
  return p;
}

}  // namespace tclp

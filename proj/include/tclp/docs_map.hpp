#pragma once

// Coverage map: every implemented result is tied to the operation realizing it
// and to the tests exercising it. One entry per line,
//
//   anchor | description | op | Suite.Test, Suite.Test
//
// '#' starts a comment line.

#include <algorithm>
#include <filesystem>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tclp/errors.hpp"
#include "tclp/text.hpp"

namespace tclp {

struct MapEntry {
  std::string anchor;
  std::string description;
  std::string op;
  std::vector<std::string> tests;
  std::size_t line = 0;
};

/// Anchors the map must contain.
inline const std::vector<std::string>& required_anchors() {
  static const std::vector<std::string> anchors{
      // linear algebra and dynamics
      "superoperator-algebra", "restricted-inverse", "hilbert-schmidt-basis", "propagator-equation",
      "propagator-derivative", "dyson-expansion",
      // time-local equation and its expansion
      "kinetic-equation-coefficients", "kinetic-equation-identity", "composition-enumeration",
      "expansion-building-blocks", "kinetic-coefficient-series", "inhomogeneity-series",
      // ansatzes and projectors
      "relevant-observables", "consistent-ansatz", "gibbs-family", "renyi-family", "kg-parametric", "kg-nonlinear",
      "kg-time-dependent", "argyres-kelley", "kg-composition-law", "kg-projects-onto-ansatz", "robertson-condition",
      "linear-ansatz-constant-projector", "traceless-input", "pauli-function-collapse", "linear-qubit-projector",
      "biorthogonal-linear-ansatz", "two-level-ansatz", "two-level-ansatz-derivative",
      // averaged equations
      "first-order-averaging", "second-order-mean-equation", "consistent-start-mean-dynamics",
      // resonance fluorescence
      "rotating-frame-damping", "rotating-frame-drive", "interaction-representation", "resonance-fluorescence-model",
      "exact-reference", "linear-example-equations", "linear-example-error-coefficient", "linear-example-error-order",
      "wick-scaled-equations", "wick-limit-equations", "dissipative-wick-rotation", "nonlinear-example-equation",
      "nonlinear-closed-form", "first-order-branches", "side-solution", "high-temperature-generator",
      "zero-alpha-reduction", "f-independence", "nonlinear-example"};
  return anchors;
}

inline std::vector<MapEntry> parse_map(const std::string& text) {
  std::vector<MapEntry> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = detail::trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto cells = detail::split(s, '|');
    if (cells.size() != 4) throw ParseError("coverage map: expected 4 '|'-separated fields", line);
    MapEntry e{cells[0], cells[1], cells[2], {}, line};
    if (e.anchor.empty()) throw ParseError("coverage map: empty anchor", line);
    for (const auto& t : detail::split(cells[3], ','))
      if (!t.empty()) e.tests.push_back(t);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<MapEntry> load_map(const std::string& path) { return parse_map(detail::slurp(path)); }

/// "Suite.Name" for every TEST/TEST_F/TEST_P in the given sources.
inline std::set<std::string> collect_test_ids(const std::vector<std::string>& sources) {
  static const std::regex pattern(R"(\bTEST(?:_F|_P)?\(\s*(\w+)\s*,\s*(\w+)\s*\))");
  std::set<std::string> ids;
  for (const auto& src : sources)
    for (std::sregex_iterator it(src.begin(), src.end(), pattern), end; it != end; ++it)
      ids.insert((*it)[1].str() + "." + (*it)[2].str());
  return ids;
}

/// Concatenated contents of the files in `dir` with one of the extensions.
inline std::vector<std::string> read_sources(const std::string& dir, const std::vector<std::string>& extensions) {
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(dir))
    if (f.is_regular_file() &&
        std::find(extensions.begin(), extensions.end(), f.path().extension().string()) != extensions.end())
      files.push_back(f.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(detail::slurp(f));
  return out;
}

struct MapReport {
  std::size_t entries = 0;
  std::vector<std::string> problems;

  bool passed() const { return problems.empty(); }
};

/// Checks a parsed map against the required anchors, the known test ids and
/// the library source text (operations must occur there as identifiers).
inline MapReport check_map_completeness(const std::vector<MapEntry>& map, const std::vector<std::string>& required,
                                        const std::set<std::string>& test_ids,
                                        const std::vector<std::string>& library_sources) {
  MapReport r;
  r.entries = map.size();
  std::map<std::string, std::size_t> seen;
  for (const auto& e : map) {
    const std::string where = "anchor '" + e.anchor + "' (line " + std::to_string(e.line) + ")";
    if (auto [it, fresh] = seen.emplace(e.anchor, e.line); !fresh)
      r.problems.push_back("duplicate " + where + ", first at line " + std::to_string(it->second));
    if (e.op.empty()) {
      r.problems.push_back(where + ": no operation");
    } else {
      const std::regex word("\\b" + e.op + "\\b");
      const bool found = std::any_of(library_sources.begin(), library_sources.end(),
                                     [&](const std::string& s) { return std::regex_search(s, word); });
      if (!found) r.problems.push_back(where + ": operation '" + e.op + "' not found in the library");
    }
    if (e.tests.empty()) r.problems.push_back(where + ": no tests");
    for (const auto& t : e.tests)
      if (!test_ids.count(t)) r.problems.push_back(where + ": test '" + t + "' does not exist");
  }
  for (const auto& a : required)
    if (!seen.count(a)) r.problems.push_back("anchor '" + a + "' missing from the map");
  return r;
}

/// Reads map, tests and headers from a source tree laid out like this repository.
inline MapReport check_map_completeness(const std::string& root) {
  const std::filesystem::path base(root);
  const auto map = load_map((base / "docs" / "coverage_map.txt").string());
  const auto tests = collect_test_ids(read_sources((base / "tests").string(), {".cpp", ".hpp"}));
  return check_map_completeness(map, required_anchors(), tests,
                                read_sources((base / "include" / "tclp").string(), {".hpp"}));
}

}  // namespace tclp

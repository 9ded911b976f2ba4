#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pnlab/monte_carlo.hpp"
#include "pnlab/pinn.hpp"
#include "pnlab/pn_model.hpp"

namespace pnlab {

/// Scalar or array value from a case file.
using CaseValue = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;
using CaseTable = std::map<std::string, CaseValue>;

/// Minimal TOML subset: `key = value` lines, `[section]` headers and
/// `[[region]]` array tables. Values are numbers, booleans, double-quoted
/// strings, or single-line arrays of numbers or of strings. `#` starts a
/// comment outside strings.
struct CaseDocument {
  CaseTable root;
  std::map<std::string, CaseTable> sections;
  std::vector<CaseTable> regions;
};

CaseDocument parse_case_document(const std::string& text);

enum class SolverKind { Pinn, Lsfe, Mc, Analytic };
std::string_view to_string(SolverKind kind);
SolverKind parse_solver(std::string_view name);

struct LsfeSettings {
  int elements = 20;
  double boundary_weight = 1.0;
};

struct CaseFile {
  std::string name;
  /// Problem with the case's default scaling; solvers override it per mode.
  SlabProblem problem;
  std::vector<SolverKind> solvers;
  std::vector<ScalingMode> modes = {ScalingMode::Unscaled, ScalingMode::Diffusive};
  SolverKind reference = SolverKind::Analytic;
  PinnConfig pinn;
  LsfeSettings lsfe;
  McConfig mc;
  int mc_cells = 200;
  int grid_points = 200;
  std::string output_dir;

  /// Problem under a given ε (asymptotic cases only).
  SlabProblem problem_for(ScalingMode mode, std::optional<double> epsilon = std::nullopt) const;
  bool is_asymptotic() const { return asymptotic_; }
  double alpha() const { return alpha_; }

  bool asymptotic_ = false;
  double alpha_ = 0.0;
};

/// Parses and validates; unknown sections or keys are rejected.
CaseFile parse_case(const std::string& text);
CaseFile load_case(const std::filesystem::path& path);

}  // namespace pnlab

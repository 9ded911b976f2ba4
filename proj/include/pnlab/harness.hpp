#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pnlab/case_file.hpp"
#include "pnlab/error_metric.hpp"
#include "pnlab/flux.hpp"

namespace pnlab {

struct RunOptions {
  /// Artifacts go to output_root / case.output_dir; empty disables writing.
  std::filesystem::path output_root;
  /// Replaces the PINN seeds by (seed, seed+1, ...) and the MC seed by seed.
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
};

/// Value of PNLAB_OUTPUT_DIR, or "pnlab_out".
std::filesystem::path output_root_from_env();

struct SolverRun {
  SolverKind solver = SolverKind::Lsfe;
  ScalingMode mode = ScalingMode::Unscaled;
  FluxSolution solution;
  ErrorReport error;
  /// Errors restricted to each material region (multi-region problems).
  std::vector<ErrorReport> region_errors;
  /// PINN only: error of each ensemble member.
  std::vector<ErrorReport> member_errors;
  nlohmann::json manifest;
};

struct CaseResult {
  Eigen::VectorXd grid;
  FluxSolution reference;
  std::vector<SolverRun> runs;
  nlohmann::json manifest;
};

/// Reference phi_0 and the grid errors are measured on: the analytic solution
/// on G equidistant points, or the Monte Carlo tally on its cell centers.
FluxSolution reference_solution(const CaseFile& c, const SlabProblem& problem, Eigen::VectorXd& grid,
                                nlohmann::json& manifest);

SolverRun run_solver(const CaseFile& c, SolverKind solver, const SlabProblem& problem, const FluxSolution& reference,
                     const Eigen::Ref<const Eigen::VectorXd>& grid, const RunOptions& options);

/// Runs every (solver, mode) of the case against its reference and writes
/// CSVs, errors.json, manifest.json and plot.svg when an output root is set.
CaseResult run_case(const CaseFile& c, const RunOptions& options);

struct SweepRow {
  double epsilon = 0.0;
  SolverKind solver = SolverKind::Lsfe;
  ScalingMode mode = ScalingMode::Unscaled;
  double xi_rel = 0.0;
  double max_phi0 = 0.0;
};

/// One run per (epsilon, solver, mode) in declaration order.
std::vector<SweepRow> sweep_epsilon(const CaseFile& c, const std::vector<double>& epsilons, const RunOptions& options);

/// Long form: epsilon,solver,scaling,xi_rel,xi_rel_percent,max_phi0.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
/// Wide form: one row per method, one column per epsilon, percentages.
void write_sweep_table(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

std::string scaling_label(ScalingMode mode);

}  // namespace pnlab

#pragma once

#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pnlab/flux.hpp"

namespace pnlab {

struct ErrorReport {
  /// sqrt(sum (sol - ref)^2 / sum ref^2) over the grid.
  double xi_rel = 0.0;
  /// Unnormalized sum of per-point squared relative errors.
  double xi_rel_pointwise = 0.0;
  /// ((sol - ref) / ref)^2 per grid point; 0 where ref is exactly zero.
  Eigen::VectorXd per_point;
  int excluded_points = 0;
  Eigen::Index grid_size = 0;
  std::string solver;
  std::string reference;
};

/// Compares phi_0 of both solutions on `grid` (linear interpolation).
ErrorReport compute_error(const FluxSolution& solution, const FluxSolution& reference,
                          const Eigen::Ref<const Eigen::VectorXd>& grid);

nlohmann::json to_json(const ErrorReport& report);

}  // namespace pnlab

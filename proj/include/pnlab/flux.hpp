#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace pnlab {

/// Moment values on a grid; row g holds (phi_0 ... phi_N) at x(g).
struct FluxSolution {
  Eigen::VectorXd x;
  Eigen::MatrixXd moments;
  std::optional<Eigen::VectorXd> phi0_stderr;
  std::map<std::string, std::string> metadata;

  Eigen::Index size() const { return x.size(); }
  int num_moments() const { return static_cast<int>(moments.cols()); }

  /// Piecewise-linear interpolation of phi_0 (linear extrapolation past the
  /// first/last point, constant for a single point).
  double phi0_at(double xq) const;
  Eigen::VectorXd phi0_on(const Eigen::Ref<const Eigen::VectorXd>& grid) const;
};

/// G equidistant points including both ends.
Eigen::VectorXd equidistant_grid(double a, double b, int count);

/// CSV with header x,phi_0,...,phi_N.
void write_flux_csv(const std::filesystem::path& path, const FluxSolution& solution);
FluxSolution read_flux_csv(const std::filesystem::path& path);

}  // namespace pnlab

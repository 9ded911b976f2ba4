#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "pnlab/flux.hpp"
#include "pnlab/pn_model.hpp"

namespace pnlab {

struct McConfig {
  std::int64_t histories = 20000;
  std::uint64_t seed = 1;
  double weight_cutoff = 1e-3;
  /// Tally cell edges, strictly increasing, spanning the slab.
  std::vector<double> tally_grid;
  /// Worker threads; 0 means hardware concurrency. Results do not depend on it.
  int threads = 0;
  /// When false, absorption is analog (no implicit capture, no roulette).
  bool implicit_capture = true;
};

/// Track-length scalar-flux tally, normalized to the total source strength.
struct McTally {
  std::vector<double> edges;
  Eigen::VectorXd flux;
  Eigen::VectorXd stderr_flux;
  std::int64_t histories = 0;
  double source_strength = 0.0;  // int Q dx
  // Per-source-particle totals (mean over histories) and their standard errors.
  double absorbed = 0.0;
  double leaked = 0.0;
  double balance = 0.0;  // absorbed + leaked
  double balance_stderr = 0.0;
  std::int64_t collisions = 0;

  Eigen::VectorXd centers() const;
};

/// Isotropic fixed-source random walk with implicit capture, Russian roulette
/// below the weight cutoff (survival 1/2, weight doubled), specular
/// reflection and vacuum leakage. ε-form problems are converted to physical
/// cross sections first. Each history draws from its own generator keyed by
/// (seed, history index); histories are grouped into a fixed number of
/// batches merged in order, so the result is independent of thread count.
McTally mc_simulate(const SlabProblem& problem, const McConfig& config);

/// Cell-average values at the cell centers, standard errors attached.
FluxSolution mc_to_solution(const McTally& tally);
/// Same, checking that `grid` is the tally's cell-center grid.
FluxSolution mc_to_solution(const McTally& tally, const Eigen::Ref<const Eigen::VectorXd>& grid);

/// CSV: x_center,phi0,stderr.
void write_tally_csv(const std::filesystem::path& path, const McTally& tally);

}  // namespace pnlab

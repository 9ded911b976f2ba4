#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnlab/flux.hpp"
#include "pnlab/pn_model.hpp"

namespace pnlab {

struct Mesh1D {
  std::vector<double> nodes;

  int elements() const { return static_cast<int>(nodes.size()) - 1; }

  static Mesh1D uniform(double a, double b, int elements);
  /// Uniform-ish mesh with a node on every material interface; elements are
  /// distributed over the regions in proportion to their length.
  static Mesh1D for_problem(const SlabProblem& problem, int elements);
};

/// Symmetric banded matrix, lower band stored column-wise:
/// band(i - j, j) = A(i, j) for 0 <= i - j <= kd.
class BandedSymmetricMatrix {
 public:
  BandedSymmetricMatrix() = default;
  BandedSymmetricMatrix(Eigen::Index n, Eigen::Index kd) : n_(n), kd_(kd), band_(Eigen::MatrixXd::Zero(kd + 1, n)) {}

  Eigen::Index size() const { return n_; }
  Eigen::Index bandwidth() const { return kd_; }

  /// Entry (i, j) with |i - j| <= kd; either triangle addresses the same slot.
  double& at(Eigen::Index i, Eigen::Index j);
  double operator()(Eigen::Index i, Eigen::Index j) const;

  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  const Eigen::MatrixXd& band() const { return band_; }

 private:
  Eigen::Index n_ = 0;
  Eigen::Index kd_ = 0;
  Eigen::MatrixXd band_;
};

/// Least-squares system; dofs are node-major: dof(n, node) = node*(N+1) + n.
struct FemSystem {
  int moments = 0;
  Mesh1D mesh;
  BandedSymmetricMatrix matrix;
  Eigen::VectorXd rhs;

  Eigen::Index dof(int moment, int node) const { return static_cast<Eigen::Index>(node) * moments + moment; }
};

/// Assemble the P1 least-squares normal equations of the (row-scaled) P_N
/// system with 3-point Gauss quadrature, plus boundary_weight * sum_m (B_m phi)^2
/// at the two end nodes. `element_order`, when given, is a permutation of the
/// element indices controlling the assembly order.
FemSystem assemble(const SlabProblem& problem, const Mesh1D& mesh, double boundary_weight = 1.0,
                   const std::vector<int>& element_order = {});

struct SolveReport {
  Eigen::VectorXd coefficients;
  std::string method;  // "cholesky" or "lu"
  double relative_residual = 0.0;
  double pivot_ratio = 0.0;  // min/max |pivot|, a cheap conditioning hint
};

/// Banded Cholesky, falling back to banded LU with partial pivoting when a
/// nonpositive pivot appears. Throws SingularSystem when LU breaks down too.
SolveReport solve_banded(const BandedSymmetricMatrix& a, const Eigen::Ref<const Eigen::VectorXd>& b);
SolveReport solve(const FemSystem& system);

/// Banded LU with partial pivoting on its own (exposed for testing).
Eigen::VectorXd banded_lu_solve(const BandedSymmetricMatrix& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                                double* pivot_ratio = nullptr);

/// Piecewise-linear interpolation of every moment at the grid points.
FluxSolution evaluate(const Mesh1D& mesh, const Eigen::Ref<const Eigen::VectorXd>& coefficients, int moments,
                      const Eigen::Ref<const Eigen::VectorXd>& grid);

/// Coordinate-format dump ("i j value" per stored lower entry) for debugging.
void write_matrix_coordinates(const std::string& path, const BandedSymmetricMatrix& a);

struct LsfeRun {
  FluxSolution solution;
  SolveReport report;
};

LsfeRun run_lsfe(const SlabProblem& problem, int elements, const Eigen::Ref<const Eigen::VectorXd>& grid,
                 double boundary_weight = 1.0);

}  // namespace pnlab

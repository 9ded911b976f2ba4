#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace pnlab {

/// Polynomial in x with ascending coefficients: c[0] + c[1] x + c[2] x^2 + ...
struct Polynomial {
  std::vector<double> coeffs;

  double operator()(double x) const;
  int degree() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs.size()) - 1; }
  double integral(double a, double b) const;
  double max_on(double a, double b) const;
  double min_on(double a, double b) const;

  static Polynomial constant(double c) { return Polynomial{{c}}; }
};

struct MaterialRegion {
  double x_lo = 0.0;
  double x_hi = 1.0;
  double sigma_t = 1.0;  // 1/cm
  double sigma_a = 0.0;  // 1/cm
  Polynomial q = Polynomial::constant(0.0);  // isotropic source density
};

/// Diffusive ε-scaling: sigma_t = 1/ε, sigma_a = αε, Q -> εQ.
struct EpsilonScaling {
  double epsilon = 1.0;
  double alpha = 0.0;
};

enum class ScalingMode { Unscaled, Diffusive };
enum class BoundaryKind { Vacuum, Reflective };
enum class Side { Left, Right };

struct SlabProblem {
  std::vector<MaterialRegion> regions;
  int order = 1;
  BoundaryKind bc_left = BoundaryKind::Vacuum;
  BoundaryKind bc_right = BoundaryKind::Vacuum;
  ScalingMode scaling = ScalingMode::Unscaled;
  std::optional<EpsilonScaling> eps;

  /// Throws pnlab::Error on any violated invariant.
  void validate() const;

  double x_left() const { return regions.front().x_lo; }
  double x_right() const { return regions.back().x_hi; }
  double length() const { return x_right() - x_left(); }

  /// Region containing x; interfaces belong to the region on their right,
  /// the right end of the slab to the last region.
  std::size_t region_index(double x) const;

  /// Effective cross sections and source after applying the ε-scaling.
  double sigma_t(std::size_t region) const;
  double sigma_a(std::size_t region) const;
  double source(double x) const;

  /// Same problem expressed with physical cross sections (eps removed).
  SlabProblem to_physical() const;
  SlabProblem with_scaling(ScalingMode mode) const;
};

bool is_valid_order(int order);
void require_valid_order(int order);

/// (N+1)x(N+1) Legendre streaming matrix of the slab P_N system.
Eigen::MatrixXd streaming_matrix(int order);

/// Marshak vacuum rows, ((N+1)/2)x(N+1). Row m weights moment n by
/// (2n+1)/2 * int P_{2m-1}(|mu|) P_n(mu) over the incoming half range.
Eigen::MatrixXd marshak_matrix(int order, Side side);

/// Selector rows for the odd moments (reflective boundary).
Eigen::MatrixXd reflective_rows(int order);

Eigen::MatrixXd boundary_rows(int order, BoundaryKind kind, Side side);

/// Exact int_0^1 P_m(mu) P_n(mu) dmu.
double half_range_legendre_product(int m, int n);

class PnOperator {
 public:
  explicit PnOperator(const SlabProblem& problem);

  int order() const { return order_; }
  Eigen::Index moments() const { return order_ + 1; }
  const SlabProblem& problem() const { return problem_; }
  const Eigen::MatrixXd& streaming() const { return streaming_; }

  Eigen::VectorXd collision_diag(double x) const;
  Eigen::VectorXd row_scale(double x) const;
  double tau(std::size_t region) const { return tau_[region]; }
  double source(double x) const;

  /// row_scale ⊙ (A dphi + C(x) phi - q(x) e_0).
  Eigen::VectorXd residual(const Eigen::Ref<const Eigen::VectorXd>& phi,
                           const Eigen::Ref<const Eigen::VectorXd>& dphi_dx, double x) const;

 private:
  void require_inside(double x) const;

  SlabProblem problem_;
  int order_;
  Eigen::MatrixXd streaming_;
  std::vector<double> tau_;
};

double analytic_diffusion_reference(double x);
double manufactured_source(double x, double alpha);

/// Asymptotic diffusion-limit test on [0,10] with the manufactured source.
SlabProblem asymptotic_problem(double epsilon, double alpha, ScalingMode mode, int order = 1);

/// Absorber (0,2) next to a thick scatterer (2,10); reflective left, vacuum right.
SlabProblem interface_problem(ScalingMode mode, int order = 3);

}  // namespace pnlab

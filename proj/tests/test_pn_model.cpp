#include <doctest.h>

#include <cmath>
#include <random>

#include "pnlab/error.hpp"
#include "pnlab/pn_model.hpp"

using namespace pnlab;

namespace {

double legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return p0;
  for (int k = 1; k < n; ++k) {
    const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Composite Simpson on [a, b]; exact enough for low-degree polynomials.
template <typename F>
double simpson(F f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("streaming matrix entries") {
  const Eigen::MatrixXd a1 = streaming_matrix(1);
  Eigen::Matrix2d expected;
  expected << 0, 1, 1.0 / 3.0, 0;
  CHECK(a1.isApprox(expected, 1e-15));

  const Eigen::MatrixXd a3 = streaming_matrix(3);
  Eigen::RowVector4d row1(1.0 / 3.0, 0, 2.0 / 3.0, 0);
  Eigen::RowVector4d row3(0, 0, 3.0 / 7.0, 0);
  CHECK(a3.row(1).isApprox(row1, 1e-15));
  CHECK(a3.row(3).isApprox(row3, 1e-15));

  for (int n : {1, 3, 5, 7, 9}) {
    const Eigen::MatrixXd a = streaming_matrix(n);
    // Interior rows sum to one; the last row loses its closure term.
    const Eigen::VectorXd sums = a.rowwise().sum();
    CHECK((sums.head(n).array() - 1.0).abs().maxCoeff() <= 1e-15);
    CHECK(sums(n) < 1.0);
    CHECK(a.minCoeff() >= 0.0);
  }
}

TEST_CASE("invalid orders are rejected") {
  for (int n : {0, 2, 4, -1}) {
    CHECK(kind_of([&] { streaming_matrix(n); }) == ErrorKind::InvalidOrder);
    CHECK(kind_of([&] { marshak_matrix(n, Side::Left); }) == ErrorKind::InvalidOrder);
  }
}

TEST_CASE("half-range Legendre products against quadrature") {
  for (int m = 0; m <= 7; ++m) {
    for (int n = 0; n <= 7; ++n) {
      const double q = simpson([&](double mu) { return legendre(m, mu) * legendre(n, mu); }, 0.0, 1.0);
      CHECK(std::abs(half_range_legendre_product(m, n) - q) < 1e-10);
    }
  }
}

TEST_CASE("Marshak rows") {
  const Eigen::MatrixXd left = marshak_matrix(1, Side::Left);
  const Eigen::MatrixXd right = marshak_matrix(1, Side::Right);
  CHECK(left(0, 0) == doctest::Approx(0.25));
  CHECK(left(0, 1) == doctest::Approx(0.5));
  CHECK(right(0, 0) == doctest::Approx(0.25));
  CHECK(right(0, 1) == doctest::Approx(-0.5));

  const Eigen::MatrixXd m3 = marshak_matrix(3, Side::Left);
  CHECK(m3.rows() == 2);
  CHECK(m3.cols() == 4);
  CHECK(m3(0, 2) == doctest::Approx(5.0 / 16.0));

  // Incoming half range on the right is mu in [-1, 0): P_{2m-1}(mu) weighted.
  for (int order : {1, 3, 5}) {
    const Eigen::MatrixXd r = marshak_matrix(order, Side::Right);
    for (int m = 1; m <= (order + 1) / 2; ++m) {
      for (int n = 0; n <= order; ++n) {
        const double q = simpson([&](double mu) { return legendre(2 * m - 1, mu) * legendre(n, mu); }, -1.0, 0.0);
        // Normalized so the P_1 row reads like the left one: |mu| weighting.
        CHECK(r(m - 1, n) == doctest::Approx(-(2 * n + 1) / 2.0 * q).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("reflective rows pick odd moments") {
  const Eigen::MatrixXd r = reflective_rows(5);
  CHECK(r.rows() == 3);
  CHECK(r.cols() == 6);
  for (int i = 0; i < 3; ++i) {
    for (int n = 0; n < 6; ++n) CHECK(r(i, n) == (n == 2 * i + 1 ? 1.0 : 0.0));
  }
}

TEST_CASE("residual examples") {
  const double eps = 1e-2, alpha = 0.3;
  SlabProblem p;
  p.regions = {MaterialRegion{0.0, 1.0, 1.0, 0.0, Polynomial::constant(0.0)}};
  p.order = 3;
  const PnOperator zero(p);
  CHECK(zero.residual(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), 0.5).norm() == 0.0);

  const SlabProblem un = asymptotic_problem(eps, alpha, ScalingMode::Unscaled);
  const PnOperator op(un);
  const Eigen::Vector2d phi(2.0, -0.7), dphi(0.4, 1.3);
  const double x = 3.7;
  const double q = manufactured_source(x, alpha);
  const Eigen::VectorXd r = op.residual(phi, dphi, x);
  CHECK(r(0) == doctest::Approx(dphi(1) + eps * alpha * phi(0) - eps * q).epsilon(1e-14));
  CHECK(r(1) == doctest::Approx(dphi(0) / 3.0 + phi(1) / eps).epsilon(1e-14));

  const PnOperator sc(asymptotic_problem(eps, alpha, ScalingMode::Diffusive));
  const double tau = std::sqrt(alpha) * eps;
  CHECK(sc.tau(0) == doctest::Approx(tau).epsilon(1e-14));
  const Eigen::VectorXd rs = sc.residual(phi, dphi, x);
  CHECK(rs(0) == doctest::Approx(r(0)).epsilon(1e-14));
  CHECK(rs(1) == doctest::Approx(tau * r(1)).epsilon(1e-14));
}

TEST_CASE("diffusive tau from physical cross sections") {
  const SlabProblem p = interface_problem(ScalingMode::Diffusive);
  const PnOperator op(p);
  CHECK(op.tau(0) == doctest::Approx(1.0));
  CHECK(op.tau(1) == doctest::Approx(std::sqrt(1e-4 / 100.0)));
  const Eigen::VectorXd s = op.row_scale(5.0);
  CHECK(s(0) == 1.0);
  for (int n = 1; n < 4; ++n) CHECK(s(n) == doctest::Approx(1e-3));
}

TEST_CASE("residual outside the slab") {
  const PnOperator op(asymptotic_problem(0.1, 1.0, ScalingMode::Unscaled));
  CHECK(kind_of([&] { op.residual(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 10.5); }) == ErrorKind::OutOfDomain);
  CHECK(kind_of([&] { op.residual(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), -1e-9); }) == ErrorKind::OutOfDomain);
}

TEST_CASE("collision diagonal") {
  const PnOperator op(asymptotic_problem(1e-3, 2.0, ScalingMode::Unscaled, 3));
  const Eigen::VectorXd c = op.collision_diag(1.0);
  CHECK(c(0) == doctest::Approx(2e-3));
  for (int n = 1; n < 4; ++n) CHECK(c(n) == doctest::Approx(1e3));
}

TEST_CASE("manufactured source satisfies the diffusion equation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const double alpha = 1e-2;
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    const double h = 0.5;  // second difference is exact for quadratics
    const double d2 = (analytic_diffusion_reference(x + h) - 2 * analytic_diffusion_reference(x) +
                       analytic_diffusion_reference(x - h)) / (h * h);
    const double lhs = -d2 / 3.0 + alpha * analytic_diffusion_reference(x);
    CHECK(std::abs(lhs - manufactured_source(x, alpha)) < 1e-12);
  }
  CHECK(analytic_diffusion_reference(0.0) == 0.0);
  CHECK(analytic_diffusion_reference(10.0) == 0.0);
  CHECK(analytic_diffusion_reference(5.0) == 37.5);
}

TEST_CASE("problem validation") {
  SlabProblem p = interface_problem(ScalingMode::Unscaled);
  CHECK_NOTHROW(p.validate());

  SlabProblem gap = p;
  gap.regions[1].x_lo = 2.5;
  CHECK(kind_of([&] { gap.validate(); }) == ErrorKind::InvalidArgument);

  SlabProblem even = p;
  even.order = 2;
  CHECK(kind_of([&] { even.validate(); }) == ErrorKind::InvalidOrder);

  SlabProblem absorb = p;
  absorb.regions[0].sigma_a = 3.0;
  CHECK(kind_of([&] { absorb.validate(); }) == ErrorKind::InvalidArgument);

  SlabProblem negative = p;
  negative.regions[0].q = Polynomial{{1.0, -1.0}};
  CHECK(kind_of([&] { negative.validate(); }) == ErrorKind::InvalidArgument);

  CHECK(p.region_index(2.0) == 1);
  CHECK(p.region_index(10.0) == 1);
  CHECK(p.region_index(0.0) == 0);
}

TEST_CASE("epsilon form converts to physical cross sections") {
  const SlabProblem p = asymptotic_problem(1e-2, 1e-2, ScalingMode::Diffusive);
  const SlabProblem phys = p.to_physical();
  CHECK_FALSE(phys.eps.has_value());
  CHECK(phys.regions[0].sigma_t == doctest::Approx(100.0));
  CHECK(phys.regions[0].sigma_a == doctest::Approx(1e-4));
  CHECK(phys.source(5.0) == doctest::Approx(1e-2 * manufactured_source(5.0, 1e-2)));
  CHECK(p.source(5.0) == doctest::Approx(phys.source(5.0)));
}

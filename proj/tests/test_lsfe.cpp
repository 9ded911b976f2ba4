#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pnlab/error.hpp"
#include "pnlab/lsfe.hpp"

using namespace pnlab;

namespace {

SlabProblem one_region(int order, BoundaryKind left, BoundaryKind right) {
  SlabProblem p;
  MaterialRegion r;
  r.x_lo = 1.0;
  r.x_hi = 2.5;
  r.sigma_t = 3.0;
  r.sigma_a = 0.7;
  r.q = Polynomial{{0.5, -1.0, 2.0}};
  p.regions = {r};
  p.order = order;
  p.bc_left = left;
  p.bc_right = right;
  return p;
}

// Composite Simpson on [a, b] with 2n panels.
template <typename F>
double simpson(F&& f, double a, double b, int n = 400) {
  const double h = (b - a) / (2 * n);
  double s = f(a) + f(b);
  for (int i = 1; i < 2 * n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

BandedSymmetricMatrix random_spd(Eigen::Index n, Eigen::Index kd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BandedSymmetricMatrix a(n, kd);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i <= std::min(n - 1, j + kd); ++i) a.at(i, j) = u(rng);
    a.at(j, j) = 2.0 * kd + 1.0 + u(rng);
  }
  return a;
}

}  // namespace

TEST_CASE("single-element matrix and load against direct integration") {
  for (int order : {1, 3}) {
    for (double bw : {0.0, 2.0}) {
      const auto problem = one_region(order, BoundaryKind::Vacuum, BoundaryKind::Reflective);
      const Mesh1D mesh = Mesh1D::uniform(1.0, 2.5, 1);
      const FemSystem sys = assemble(problem, mesh, bw);
      const PnOperator op(problem);
      const int m = order + 1;
      const double xa = 1.0, xb = 2.5, h = xb - xa;
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
      // Residual contribution of basis function (moment k, node j) at x, source removed.
      auto basis_residual = [&](int idx, double x) {
        const int node = idx / m, k = idx % m;
        Eigen::VectorXd phi = zero, dphi = zero;
        phi(k) = node == 0 ? (xb - x) / h : (x - xa) / h;
        dphi(k) = node == 0 ? -1.0 / h : 1.0 / h;
        return Eigen::VectorXd(op.residual(phi, dphi, x) - op.residual(zero, zero, x));
      };
      const Eigen::MatrixXd bl = boundary_rows(order, problem.bc_left, Side::Left);
      const Eigen::MatrixXd br = boundary_rows(order, problem.bc_right, Side::Right);
      double worst = 0.0, scale = 0.0;
      for (int i = 0; i < 2 * m; ++i) {
        for (int j = 0; j < 2 * m; ++j) {
          double kij = simpson([&](double x) { return basis_residual(i, x).dot(basis_residual(j, x)); }, xa, xb);
          if (i / m == j / m) {
            const Eigen::MatrixXd& b = i / m == 0 ? bl : br;
            kij += bw * b.col(i % m).dot(b.col(j % m));
          }
          worst = std::max(worst, std::abs(kij - sys.matrix(i, j)));
          scale = std::max(scale, std::abs(kij));
        }
        const double bi =
            -simpson([&](double x) { return basis_residual(i, x).dot(op.residual(zero, zero, x)); }, xa, xb);
        CHECK(sys.rhs(i) == doctest::Approx(bi).epsilon(1e-12));
      }
      CHECK(worst <= 1e-12 * scale);
    }
  }
}

TEST_CASE("assembly order does not change the system") {
  const auto problem = interface_problem(ScalingMode::Diffusive, 3);
  const Mesh1D mesh = Mesh1D::for_problem(problem, 30);
  std::vector<int> reversed(30);
  std::iota(reversed.rbegin(), reversed.rend(), 0);
  const auto a = assemble(problem, mesh);
  const auto b = assemble(problem, mesh, 1.0, reversed);
  CHECK((a.matrix.band() - b.matrix.band()).cwiseAbs().maxCoeff() <= 1e-12 * a.matrix.band().cwiseAbs().maxCoeff());
  CHECK((a.rhs - b.rhs).norm() <= 1e-12 * a.rhs.norm());
  CHECK_THROWS_AS(assemble(problem, mesh, 1.0, {0, 1, 2}), Error);
}

TEST_CASE("banded Cholesky agrees with a dense solve") {
  for (Eigen::Index kd : {1, 3, 7}) {
    const auto a = random_spd(60, kd, 7 + kd);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(60, -2.0, 3.0);
    const auto r = solve_banded(a, b);
    const Eigen::VectorXd dense = a.to_dense().ldlt().solve(b);
    CHECK(r.method == "cholesky");
    CHECK((r.coefficients - dense).norm() <= 1e-9 * dense.norm());
    CHECK(r.relative_residual < 1e-12);
    CHECK((a.multiply(dense) - a.to_dense() * dense).norm() < 1e-12 * b.norm());
  }
}

TEST_CASE("indefinite systems fall back to LU") {
  auto a = random_spd(40, 3, 99);
  a.at(5, 5) = -30.0;
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(40);
  const auto r = solve_banded(a, b);
  CHECK(r.method == "lu");
  CHECK(r.relative_residual < 1e-12);
  const Eigen::VectorXd dense = a.to_dense().fullPivLu().solve(b);
  CHECK((r.coefficients - dense).norm() <= 1e-9 * dense.norm());
}

TEST_CASE("singular systems are reported") {
  BandedSymmetricMatrix a(6, 1);
  for (int i = 0; i < 6; ++i) a.at(i, i) = i == 3 ? 0.0 : 1.0;
  CHECK_THROWS_AS(solve_banded(a, Eigen::VectorXd::Ones(6)), Error);
  try {
    solve_banded(a, Eigen::VectorXd::Ones(6));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularSystem);
  }
  CHECK_THROWS_AS(solve_banded(a, Eigen::VectorXd::Ones(5)), Error);
}

TEST_CASE("meshes respect interfaces") {
  const auto problem = interface_problem(ScalingMode::Unscaled);
  const Mesh1D mesh = Mesh1D::for_problem(problem, 50);
  CHECK(mesh.elements() == 50);
  CHECK(std::find(mesh.nodes.begin(), mesh.nodes.end(), 2.0) != mesh.nodes.end());
  CHECK(mesh.nodes.front() == 0.0);
  CHECK(mesh.nodes.back() == 10.0);
  try {
    assemble(problem, Mesh1D::uniform(0.0, 10.0, 3));
    FAIL("expected a straddle error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InterfaceStraddle);
  }
  CHECK_THROWS_AS(Mesh1D::for_problem(problem, 1), Error);
  CHECK_THROWS_AS(assemble(problem, Mesh1D::uniform(0.0, 9.0, 9)), Error);
}

TEST_CASE("uniform infinite medium is reproduced exactly") {
  // Reflective on both sides: phi0 = q / sigma_a, all other moments zero.
  auto problem = one_region(3, BoundaryKind::Reflective, BoundaryKind::Reflective);
  problem.regions[0].q = Polynomial::constant(1.4);
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(17, 1.0, 2.5);
  const auto run = run_lsfe(problem, 12, grid);
  CHECK((run.solution.moments.col(0).array() - 2.0).abs().maxCoeff() < 1e-10);
  CHECK(run.solution.moments.rightCols(3).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("second-order convergence under refinement") {
  const auto problem = asymptotic_problem(1.0, 0.5, ScalingMode::Unscaled, 3);
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(101, 0.0, 10.0);
  const Eigen::VectorXd fine = run_lsfe(problem, 2560, grid).solution.moments.col(0);
  double prev = 0.0;
  for (int ne : {20, 40, 80}) {
    const double err = (run_lsfe(problem, ne, grid).solution.moments.col(0) - fine).norm();
    if (prev > 0.0) CHECK(prev / err > 3.0);
    prev = err;
  }
}

TEST_CASE("evaluation interpolates nodal values and rejects points outside") {
  const Mesh1D mesh = Mesh1D::uniform(0.0, 2.0, 2);
  Eigen::VectorXd c(6);
  c << 1, 10, 3, 20, 5, 40;  // node-major, two moments
  Eigen::VectorXd grid(4);
  grid << 0.0, 0.5, 1.0, 2.0;
  const auto sol = evaluate(mesh, c, 2, grid);
  CHECK(sol.moments(1, 0) == doctest::Approx(2.0));
  CHECK(sol.moments(1, 1) == doctest::Approx(15.0));
  CHECK(sol.moments(2, 0) == 3.0);
  CHECK(sol.moments(3, 1) == 40.0);
  Eigen::VectorXd outside(1);
  outside << 2.1;
  try {
    evaluate(mesh, c, 2, outside);
    FAIL("expected OutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfDomain);
  }
  CHECK_THROWS_AS(evaluate(mesh, c.head(4), 2, grid), Error);
}

TEST_CASE("diffusive scaling removes the interface damage") {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(201, 0.0, 10.0);
  const auto fine = run_lsfe(interface_problem(ScalingMode::Diffusive, 3), 1600, grid).solution;
  auto err = [&](ScalingMode mode) {
    const auto sol = run_lsfe(interface_problem(mode, 3), 50, grid).solution;
    return (sol.moments.col(0) - fine.moments.col(0)).norm() / fine.moments.col(0).norm();
  };
  CHECK(err(ScalingMode::Diffusive) < err(ScalingMode::Unscaled));
}

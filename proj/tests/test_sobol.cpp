#include <doctest.h>

#include <cmath>
#include <vector>

#include "pnlab/error.hpp"
#include "pnlab/sobol.hpp"

using namespace pnlab;

TEST_CASE("leading points") {
  const Eigen::MatrixXd p = sobol_points(2, 4);
  CHECK(p(0, 0) == 0.5);
  CHECK(p(0, 1) == 0.5);
  CHECK(p(1, 0) == 0.75);
  CHECK(p(1, 1) == 0.25);
  CHECK(p(2, 0) == 0.25);
  CHECK(p(2, 1) == 0.75);
  CHECK(p(3, 0) == 0.375);
  CHECK(p(3, 1) == 0.375);
  const Eigen::MatrixXd z = sobol_block(2, 0, 1);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("jump start matches sequential generation") {
  const Eigen::MatrixXd all = sobol_block(2, 0, 300);
  const Eigen::MatrixXd tail = sobol_block(2, 137, 163);
  CHECK(tail == all.bottomRows(163));
}

TEST_CASE("one-dimensional dyadic intervals hold equal counts") {
  constexpr int k = 12;
  // The skip-zero set swaps point 0 for point 2^k, which shares its interval
  // down to level k - 1 only.
  for (const auto& [pts, levels] : {std::pair{sobol_block(1, 0, 1 << k), k}, std::pair{sobol_points(1, 1 << k), k - 1}}) {
    for (int m = 0; m <= levels; ++m) {
      std::vector<int> counts(1 << m, 0);
      for (Eigen::Index i = 0; i < pts.rows(); ++i) ++counts[static_cast<int>(std::floor(pts(i, 0) * (1 << m)))];
      for (int c : counts) CHECK(c == (1 << (k - m)));
    }
  }
}

TEST_CASE("two-dimensional elementary intervals hold one point each") {
  constexpr int k = 10;
  const Eigen::MatrixXd pts = sobol_block(2, 0, 1 << k);
  for (int a = 0; a <= k; ++a) {
    const int b = k - a;
    std::vector<int> counts(1 << k, 0);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const int ix = static_cast<int>(std::floor(pts(i, 0) * (1 << a)));
      const int iy = static_cast<int>(std::floor(pts(i, 1) * (1 << b)));
      ++counts[(ix << b) + iy];
    }
    for (int c : counts) CHECK(c == 1);
  }
}

TEST_CASE("quadrature of u^2") {
  const Eigen::MatrixXd pts = sobol_points(1, 4096);
  const double est = pts.col(0).array().square().mean();
  CHECK(std::abs(est - 1.0 / 3.0) < 1e-3);
}

TEST_CASE("points lie in the unit interval") {
  const Eigen::MatrixXd pts = sobol_points(2, 5000);
  CHECK(pts.minCoeff() >= 0.0);
  CHECK(pts.maxCoeff() < 1.0);
}

TEST_CASE("domain map") {
  Eigen::VectorXd u(3);
  u << 0.0, 0.5, 0.25;
  const Eigen::VectorXd x = map_to_domain(u, 2.0, 10.0);
  CHECK(x(0) == 2.0);
  CHECK(x(1) == 6.0);
  CHECK(x(2) == 4.0);
  CHECK_THROWS_AS(map_to_domain(u, 1.0, 1.0), Error);
}

TEST_CASE("unsupported dimension") {
  try {
    sobol_points(3, 4);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedDimension);
  }
  CHECK_THROWS_AS(sobol_points(0, 4), Error);
}

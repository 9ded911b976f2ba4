#include <doctest.h>

#include <cmath>

#include "pnlab/error.hpp"
#include "pnlab/monte_carlo.hpp"

using namespace pnlab;

namespace {

SlabProblem absorber(double sigma, double length, BoundaryKind left, BoundaryKind right, double scatter = 0.0) {
  SlabProblem p;
  MaterialRegion r;
  r.x_lo = 0.0;
  r.x_hi = length;
  r.sigma_t = sigma + scatter;
  r.sigma_a = sigma;
  r.q = Polynomial::constant(1.0);
  p.regions = {r};
  p.order = 1;
  p.bc_left = left;
  p.bc_right = right;
  return p;
}

std::vector<double> edges(double a, double b, int cells) {
  std::vector<double> e(cells + 1);
  for (int i = 0; i <= cells; ++i) e[i] = a + (b - a) * i / cells;
  return e;
}

template <typename F>
double simpson(F&& f, double a, double b, int n = 200) {
  const double h = (b - a) / (2 * n);
  double s = f(a) + f(b);
  for (int i = 1; i < 2 * n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// E2(t) = int_0^1 exp(-t/mu) dmu.
double e2(double t) {
  if (t == 0.0) return 1.0;
  return simpson([t](double mu) { return mu == 0.0 ? 0.0 : std::exp(-t / mu); }, 0.0, 1.0, 400);
}

}  // namespace

TEST_CASE("pure absorber matches the uncollided-flux integral") {
  const double sigma = 1.0, length = 2.0;
  McConfig cfg;
  cfg.histories = 40000;
  cfg.seed = 17;
  cfg.tally_grid = edges(0.0, length, 10);
  const auto tally = mc_simulate(absorber(sigma, length, BoundaryKind::Vacuum, BoundaryKind::Vacuum), cfg);
  double worst_z = 0.0;
  for (int c = 0; c < 10; ++c) {
    const double a = cfg.tally_grid[c], b = cfg.tally_grid[c + 1];
    const double exact =
        simpson([&](double x) { return (2.0 - e2(sigma * x) - e2(sigma * (length - x))) / (2.0 * sigma); }, a, b, 20) /
        (b - a);
    worst_z = std::max(worst_z, std::abs(tally.flux(c) - exact) / tally.stderr_flux(c));
  }
  CHECK(worst_z < 4.5);
  CHECK(tally.source_strength == doctest::Approx(2.0));
  CHECK(tally.collisions > 0);
}

TEST_CASE("reflective infinite medium gives q / sigma_a") {
  McConfig cfg;
  cfg.histories = 20000;
  cfg.tally_grid = edges(0.0, 1.0, 5);
  const auto tally =
      mc_simulate(absorber(0.5, 1.0, BoundaryKind::Reflective, BoundaryKind::Reflective, 1.5), cfg);
  for (int c = 0; c < 5; ++c) CHECK(std::abs(tally.flux(c) - 2.0) < 4.5 * tally.stderr_flux(c));
  CHECK(tally.leaked == 0.0);
  CHECK(std::abs(tally.absorbed - 1.0) < 4.5 * tally.balance_stderr + 1e-12);
}

TEST_CASE("particle balance closes") {
  McConfig cfg;
  cfg.histories = 20000;
  cfg.tally_grid = edges(0.0, 10.0, 20);
  const auto tally = mc_simulate(interface_problem(ScalingMode::Unscaled), cfg);
  CHECK(std::abs(tally.balance - 1.0) <= std::max(4.5 * tally.balance_stderr, 1e-12));
  CHECK(tally.absorbed > 0.0);
  CHECK(tally.leaked > 0.0);
}

TEST_CASE("standard error falls like one over root N") {
  const auto problem = absorber(1.0, 2.0, BoundaryKind::Vacuum, BoundaryKind::Reflective, 1.0);
  McConfig cfg;
  cfg.tally_grid = edges(0.0, 2.0, 4);
  cfg.histories = 4000;
  const auto a = mc_simulate(problem, cfg);
  cfg.histories = 64000;
  const auto b = mc_simulate(problem, cfg);
  const double ratio = a.stderr_flux.mean() / b.stderr_flux.mean();
  CHECK(ratio > 3.4);
  CHECK(ratio < 4.6);
}

TEST_CASE("results do not depend on the thread count") {
  McConfig cfg;
  cfg.histories = 3000;
  cfg.seed = 5;
  cfg.tally_grid = edges(0.0, 10.0, 25);
  cfg.threads = 1;
  const auto one = mc_simulate(interface_problem(ScalingMode::Unscaled), cfg);
  cfg.threads = 3;
  const auto three = mc_simulate(interface_problem(ScalingMode::Unscaled), cfg);
  CHECK(one.flux == three.flux);
  CHECK(one.stderr_flux == three.stderr_flux);
  CHECK(one.collisions == three.collisions);
  cfg.seed = 6;
  CHECK(mc_simulate(interface_problem(ScalingMode::Unscaled), cfg).flux != one.flux);
}

TEST_CASE("refining the tally grid splits the same histories") {
  const auto problem = absorber(0.8, 4.0, BoundaryKind::Reflective, BoundaryKind::Vacuum, 2.0);
  McConfig cfg;
  cfg.histories = 4000;
  cfg.tally_grid = edges(0.0, 4.0, 8);
  const auto coarse = mc_simulate(problem, cfg);
  cfg.tally_grid = edges(0.0, 4.0, 16);
  const auto fine = mc_simulate(problem, cfg);
  for (int c = 0; c < 8; ++c) {
    CHECK(coarse.flux(c) == doctest::Approx(0.5 * (fine.flux(2 * c) + fine.flux(2 * c + 1))).epsilon(1e-12));
  }
  CHECK(coarse.balance == fine.balance);
}

TEST_CASE("implicit capture and analog absorption agree") {
  const auto problem = absorber(0.3, 3.0, BoundaryKind::Vacuum, BoundaryKind::Vacuum, 0.9);
  McConfig cfg;
  cfg.histories = 30000;
  cfg.tally_grid = edges(0.0, 3.0, 3);
  const auto implicit = mc_simulate(problem, cfg);
  cfg.implicit_capture = false;
  cfg.seed = 2;
  const auto analog = mc_simulate(problem, cfg);
  for (int c = 0; c < 3; ++c) {
    const double s = std::hypot(implicit.stderr_flux(c), analog.stderr_flux(c));
    CHECK(std::abs(implicit.flux(c) - analog.flux(c)) < 4.5 * s);
  }
  CHECK(analog.balance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("invalid inputs") {
  auto problem = absorber(1.0, 1.0, BoundaryKind::Vacuum, BoundaryKind::Vacuum);
  McConfig cfg;
  cfg.histories = 10;
  cfg.tally_grid = {0.0, 0.5, 1.0};
  problem.regions[0].q = Polynomial::constant(0.0);
  try {
    mc_simulate(problem, cfg);
    FAIL("expected ZeroSource");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroSource);
  }
  problem.regions[0].q = Polynomial::constant(1.0);
  cfg.tally_grid = {0.0, 0.7, 0.5, 1.0};
  CHECK_THROWS_AS(mc_simulate(problem, cfg), Error);
  cfg.tally_grid = {0.0, 0.9};
  CHECK_THROWS_AS(mc_simulate(problem, cfg), Error);
  cfg.tally_grid = {0.0, 0.5, 1.0};
  const auto tally = mc_simulate(problem, cfg);
  const auto sol = mc_to_solution(tally);
  CHECK(sol.x(0) == doctest::Approx(0.25));
  CHECK(sol.phi0_stderr.has_value());
  Eigen::VectorXd wrong(2);
  wrong << 0.2, 0.75;
  CHECK_THROWS_AS(mc_to_solution(tally, wrong), Error);
}

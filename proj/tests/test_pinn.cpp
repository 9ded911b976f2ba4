#include <doctest.h>

#include <cmath>

#include "pnlab/error.hpp"
#include "pnlab/pinn.hpp"

using namespace pnlab;

namespace {

MlpNetwork<double> small_net(const SlabProblem& problem, Activation act, std::uint64_t seed) {
  MlpNetwork<double> net(2, 8, problem.order + 1, act, problem.x_left(), problem.x_right());
  net.initialize(seed);
  // Non-zero biases so no point sits exactly on a ReLU kink.
  Eigen::VectorXd p = net.params();
  for (int l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) p(net.bias_offset(l) + i) = 0.05 * (i + 1) - 0.13 * l;
  }
  net.set_params(p);
  return net;
}

// Per-point oracle of the loss, visiting points in reverse order.
LossTerms oracle_loss(const PinnLoss& loss, const MlpNetwork<double>& net) {
  const PnOperator op(loss.problem());
  const Eigen::Index p = loss.interior_count();
  LossTerms t;
  for (Eigen::Index j = p - 1; j >= 0; --j) {
    const auto [v, d] = forward_with_x_derivative(net, loss.points()(j));
    t.interior += op.residual(v, d, loss.points()(j)).squaredNorm();
  }
  t.interior /= static_cast<double>(p);
  const auto vl = forward(net, loss.problem().x_left());
  const auto vr = forward(net, loss.problem().x_right());
  const auto& pr = loss.problem();
  t.boundary = 0.5 * loss.boundary_weight() *
               ((boundary_rows(pr.order, pr.bc_left, Side::Left) * vl).squaredNorm() +
                (boundary_rows(pr.order, pr.bc_right, Side::Right) * vr).squaredNorm());
  return t;
}

PinnConfig quick_config() {
  PinnConfig c;
  c.hidden_layers = 2;
  c.hidden_width = 8;
  c.n_interior_points = 40;
  c.optimizer = AdamConfig{1e-2, 300};
  c.seeds = {1, 2};
  c.record_every = 10;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("loss matches the per-point operator oracle") {
  for (const auto& problem : {asymptotic_problem(1e-2, 1e-2, ScalingMode::Diffusive, 1),
                              asymptotic_problem(1e-3, 1e-2, ScalingMode::Unscaled, 3),
                              interface_problem(ScalingMode::Diffusive, 3), interface_problem(ScalingMode::Unscaled, 5)}) {
    const PinnLoss loss(problem, 57, 1.7);
    for (Activation act : {Activation::ReLU, Activation::Tanh}) {
      const auto net = small_net(problem, act, 4);
      const auto got = loss.evaluate(net);
      const auto want = oracle_loss(loss, net);
      CHECK(got.interior == doctest::Approx(want.interior).epsilon(1e-12));
      CHECK(got.boundary == doctest::Approx(want.boundary).epsilon(1e-12));
    }
  }
}

TEST_CASE("collocation set is Sobol interior points plus both ends") {
  const PinnLoss loss(interface_problem(ScalingMode::Unscaled), 4, 1.0);
  REQUIRE(loss.points().size() == 6);
  CHECK(loss.points()(0) == doctest::Approx(5.0));
  CHECK(loss.points()(1) == doctest::Approx(7.5));
  CHECK(loss.points()(2) == doctest::Approx(2.5));
  CHECK(loss.points()(4) == 0.0);
  CHECK(loss.points()(5) == 10.0);
}

TEST_CASE("exact solution has zero loss and boundary weight scales the penalty") {
  // Reflective infinite medium: phi0 = q / sigma_a, higher moments zero.
  SlabProblem p;
  MaterialRegion r;
  r.x_lo = 0.0;
  r.x_hi = 3.0;
  r.sigma_t = 2.0;
  r.sigma_a = 0.5;
  r.q = Polynomial::constant(1.0);
  p.regions = {r};
  p.order = 3;
  p.bc_left = p.bc_right = BoundaryKind::Reflective;
  const PinnLoss loss(p, 30, 1.0);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 32), s = Eigen::MatrixXd::Zero(4, 32);
  v.row(0).setConstant(2.0);
  CHECK(loss.evaluate(v, s).total() == 0.0);

  v.row(1).setConstant(0.3);
  const PinnLoss doubled(p, 30, 2.0);
  const auto a = loss.evaluate(v, s), b = doubled.evaluate(v, s);
  CHECK(b.boundary == doctest::Approx(2.0 * a.boundary));
  CHECK(b.interior == a.interior);
  CHECK(a.boundary > 0.0);
  CHECK_THROWS_AS(loss.evaluate(v.leftCols(10), s.leftCols(10)), Error);
}

TEST_CASE("scaling is inert when tau is one") {
  SlabProblem p;
  MaterialRegion r;
  r.x_lo = 0.0;
  r.x_hi = 2.0;
  r.sigma_t = 1.5;
  r.sigma_a = 1.5;
  r.q = Polynomial{{1.0, 0.5}};
  p.regions = {r};
  p.order = 3;
  const auto net = small_net(p, Activation::Tanh, 8);
  const auto a = PinnLoss(p, 50, 1.0).evaluate(net);
  const auto b = PinnLoss(p.with_scaling(ScalingMode::Diffusive), 50, 1.0).evaluate(net);
  CHECK(a.interior == doctest::Approx(b.interior).epsilon(1e-14));
  CHECK(a.boundary == b.boundary);
}

TEST_CASE("parameter gradient against central differences") {
  const auto problem = asymptotic_problem(1e-2, 1e-2, ScalingMode::Diffusive, 1);
  const PinnLoss loss(problem, 60, 1.0);
  auto net = small_net(problem, Activation::Tanh, 3);
  BatchTape<double> tape;
  Eigen::VectorXd g;
  const auto terms = loss.value_and_gradient(net, tape, g);
  CHECK(terms.total() == doctest::Approx(loss.evaluate(net).total()).epsilon(1e-14));
  const Eigen::VectorXd p0 = net.params();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(p0(i)));
    Eigen::VectorXd p = p0;
    p(i) += h;
    net.set_params(p);
    const double fp = loss.evaluate(net).total();
    p(i) = p0(i) - h;
    net.set_params(p);
    const double fm = loss.evaluate(net).total();
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - g(i)) / std::max(std::abs(g(i)), 1e-3 * g.cwiseAbs().maxCoeff()));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("width mismatch is rejected") {
  const PinnLoss loss(interface_problem(ScalingMode::Unscaled, 3), 10, 1.0);
  MlpNetwork<double> net(1, 4, 2, Activation::Tanh, 0.0, 10.0);
  try {
    loss.evaluate(net);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
  }
}

TEST_CASE("zero source trains towards the zero solution") {
  auto problem = interface_problem(ScalingMode::Unscaled, 1);
  for (auto& r : problem.regions) r.q = Polynomial::constant(0.0);
  auto cfg = quick_config();
  const auto run = train(problem, cfg, 1);
  CHECK(run.best.total() < run.loss_history.front().total());
  CHECK(run.status == TrainStatus::Completed);
  CHECK(run.steps == 300);
  CHECK(run.loss_history.back().step == 300);
  const auto sol = run.predict(equidistant_grid(0.0, 10.0, 11));
  CHECK(sol.moments.cwiseAbs().maxCoeff() < 0.5);
}

TEST_CASE("training is reproducible and seeds matter") {
  const auto problem = asymptotic_problem(1.0, 1e-2, ScalingMode::Diffusive, 1);
  auto cfg = quick_config();
  cfg.optimizer = AdamConfig{1e-2, 50};
  const auto a = train(problem, cfg, 7), b = train(problem, cfg, 7), c = train(problem, cfg, 8);
  CHECK(a.network.params() == b.network.params());
  CHECK(a.best.total() == b.best.total());
  CHECK(a.network.params() != c.network.params());
}

TEST_CASE("best-so-far parameters are returned") {
  const auto problem = asymptotic_problem(1.0, 1e-2, ScalingMode::Diffusive, 1);
  auto cfg = quick_config();
  cfg.optimizer = AdamConfig{0.5, 100};  // deliberately unstable
  const auto run = train(problem, cfg, 3);
  if (run.status != TrainStatus::NonFinite) {
    double best = run.loss_history.front().total();
    for (const auto& r : run.loss_history) best = std::min(best, r.total());
    CHECK(run.best.total() == best);
    CHECK(PinnLoss(problem, cfg.n_interior_points, 1.0).evaluate(run.network).total() ==
          doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("non-finite training is flagged") {
  auto problem = asymptotic_problem(1.0, 1e-2, ScalingMode::Diffusive, 1);
  auto cfg = quick_config();
  cfg.optimizer = AdamConfig{1e300, 20};
  const auto run = train(problem, cfg, 1);
  CHECK(run.status == TrainStatus::NonFinite);
  CHECK(run.steps < 20);
}

TEST_CASE("L-BFGS training decreases the loss") {
  const auto problem = asymptotic_problem(1.0, 1e-2, ScalingMode::Diffusive, 1);
  auto cfg = quick_config();
  cfg.activation = Activation::Tanh;
  cfg.optimizer = LbfgsConfig{10, 200, 1e-12};
  const auto run = train(problem, cfg, 2);
  CHECK(run.best.total() < 0.05 * run.loss_history.front().total());
  CHECK(run.status != TrainStatus::NonFinite);
}

TEST_CASE("ensemble prediction is the member mean") {
  const auto problem = asymptotic_problem(1.0, 1e-2, ScalingMode::Diffusive, 1);
  auto cfg = quick_config();
  cfg.optimizer = AdamConfig{1e-2, 20};
  cfg.seeds = {3, 4, 5};
  cfg.threads = 2;
  const auto runs = train_ensemble(problem, cfg);
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].seed == 3);
  CHECK(runs[2].seed == 5);
  CHECK(runs[1].network.params() == train(problem, cfg, 4).network.params());
  const Eigen::VectorXd grid = equidistant_grid(0.0, 10.0, 9);
  const auto mean = ensemble_predict(runs, grid);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 2);
  for (const auto& r : runs) sum += r.predict(grid).moments;
  CHECK((mean.moments - sum / 3.0).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(ensemble_predict({}, grid), Error);
  const auto manifest = run_manifest(runs);
  CHECK(manifest.is_object());
}

TEST_CASE("configuration validation") {
  PinnConfig c;
  c.n_interior_points = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PinnConfig{};
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = PinnConfig{};
  c.optimizer = AdamConfig{-1.0, 10};
  CHECK_THROWS_AS(c.validate(), Error);
  c = PinnConfig{};
  CHECK_NOTHROW(c.validate());
  CHECK(c.n_restarts() == 3);
  CHECK(to_json(c)["hidden_width"] == 50);
}

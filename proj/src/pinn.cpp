#include "pnlab/pinn.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>

#include "pnlab/error.hpp"
#include "pnlab/optim.hpp"
#include "pnlab/sobol.hpp"

namespace pnlab {

void PinnConfig::validate() const {
  if (hidden_layers < 1 || hidden_width < 1) throw Error(ErrorKind::InvalidArgument, "network needs >= 1 hidden layer of width >= 1");
  if (n_interior_points < 1) throw Error(ErrorKind::InvalidArgument, "need at least one interior point");
  if (!(boundary_weight >= 0.0)) throw Error(ErrorKind::InvalidArgument, "boundary weight must be >= 0");
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one seed");
  if (record_every < 1) throw Error(ErrorKind::InvalidArgument, "record_every must be >= 1");
  if (const auto* adam = std::get_if<AdamConfig>(&optimizer)) {
    if (!(adam->learning_rate > 0.0) || adam->max_steps < 1) {
      throw Error(ErrorKind::InvalidArgument, "Adam needs lr > 0 and max_steps >= 1");
    }
  } else {
    const auto& lb = std::get<LbfgsConfig>(optimizer);
    if (lb.memory < 1 || lb.max_iterations < 1 || !(lb.tolerance >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "L-BFGS needs memory >= 1, max_iterations >= 1, tolerance >= 0");
    }
  }
}

PinnLoss::PinnLoss(const SlabProblem& problem, int n_interior, double boundary_weight)
    : problem_(problem), interior_(n_interior), weight_(boundary_weight) {
  problem_.validate();
  if (n_interior < 1) throw Error(ErrorKind::InvalidArgument, "need at least one interior point");
  if (!(boundary_weight >= 0.0)) throw Error(ErrorKind::InvalidArgument, "boundary weight must be >= 0");
  const PnOperator op(problem_);
  const Eigen::Index m = op.moments();
  streaming_ = op.streaming();
  const Eigen::VectorXd unit = sobol_points(1, n_interior).col(0);
  points_.resize(interior_ + 2);
  points_.head(interior_) = map_to_domain(unit, problem_.x_left(), problem_.x_right());
  points_(interior_) = problem_.x_left();
  points_(interior_ + 1) = problem_.x_right();
  scale_.resize(m, interior_);
  collision_.resize(m, interior_);
  source_.resize(interior_);
  for (Eigen::Index j = 0; j < interior_; ++j) {
    const double x = points_(j);
    scale_.col(j) = op.row_scale(x);
    collision_.col(j) = op.collision_diag(x);
    source_(j) = op.source(x);
  }
  b_left_ = boundary_rows(op.order(), problem_.bc_left, Side::Left);
  b_right_ = boundary_rows(op.order(), problem_.bc_right, Side::Right);
}

LossTerms PinnLoss::evaluate(const Eigen::Ref<const Eigen::MatrixXd>& values,
                             const Eigen::Ref<const Eigen::MatrixXd>& slopes, Eigen::MatrixXd* d_values,
                             Eigen::MatrixXd* d_slopes) const {
  const Eigen::Index m = streaming_.rows();
  const Eigen::Index n = points_.size();
  if (values.rows() != m || slopes.rows() != m || values.cols() != n || slopes.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "loss expects (N+1) x points() network outputs");
  }
  const auto v = values.leftCols(interior_);
  const auto s = slopes.leftCols(interior_);
  Eigen::MatrixXd r = streaming_ * s;
  r.array() += collision_.array() * v.array();
  r.row(0) -= source_;
  r.array() *= scale_.array();

  const double inv_p = 1.0 / static_cast<double>(interior_);
  const double half_w = weight_ / 2.0;  // |T_dD| = 2
  const Eigen::VectorXd bl = b_left_ * values.col(interior_);
  const Eigen::VectorXd br = b_right_ * values.col(interior_ + 1);

  LossTerms terms;
  terms.interior = r.squaredNorm() * inv_p;
  terms.boundary = half_w * (bl.squaredNorm() + br.squaredNorm());

  if (d_values != nullptr && d_slopes != nullptr) {
    d_values->resize(m, n);
    d_slopes->resize(m, n);
    r.array() *= 2.0 * inv_p * scale_.array();
    d_values->leftCols(interior_) = (collision_.array() * r.array()).matrix();
    d_slopes->leftCols(interior_).noalias() = streaming_.transpose() * r;
    d_values->col(interior_) = 2.0 * half_w * (b_left_.transpose() * bl);
    d_values->col(interior_ + 1) = 2.0 * half_w * (b_right_.transpose() * br);
    d_slopes->rightCols(2).setZero();
  }
  return terms;
}

void PinnLoss::require_width(const MlpNetwork<double>& net) const {
  if (net.output_dim() != outputs()) {
    throw Error(ErrorKind::ShapeMismatch, "network output width " + std::to_string(net.output_dim()) +
                                              " does not match N+1 = " + std::to_string(outputs()));
  }
}

LossTerms PinnLoss::evaluate(const MlpNetwork<double>& net) const {
  require_width(net);
  const auto out = evaluate_batch(net, points_);
  return evaluate(out.values, out.slopes);
}

LossTerms PinnLoss::value_and_gradient(const MlpNetwork<double>& net, BatchTape<double>& tape,
                                       Eigen::VectorXd& gradient) const {
  require_width(net);
  const auto& out = tape.forward(net, points_);
  Eigen::MatrixXd d_values;
  Eigen::MatrixXd d_slopes;
  const LossTerms terms = evaluate(out.values, out.slopes, &d_values, &d_slopes);
  tape.backward(net, d_values, d_slopes, gradient);
  return terms;
}

PinnLoss build_loss(const SlabProblem& problem, const PinnConfig& config) {
  config.validate();
  return PinnLoss(problem, config.n_interior_points, config.boundary_weight);
}

std::string_view to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::Completed: return "completed";
    case TrainStatus::Converged: return "converged";
    case TrainStatus::LineSearchFailed: return "line_search_failed";
    case TrainStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

MlpNetwork<double> make_network(const SlabProblem& problem, const PinnConfig& config) {
  return MlpNetwork<double>(config.hidden_layers, config.hidden_width, problem.order + 1, config.activation,
                            problem.x_left(), problem.x_right());
}

namespace {

bool finite(const LossTerms& t) { return std::isfinite(t.interior) && std::isfinite(t.boundary); }

class Recorder {
 public:
  Recorder(TrainedPinn& run, int every) : run_(run), every_(every) {}

  void offer(long step, const LossTerms& terms, const Eigen::VectorXd& params, bool force = false) {
    if (!force && step % every_ != 0) return;
    const LossRecord rec{step, terms.interior, terms.boundary};
    if (!run_.loss_history.empty() && run_.loss_history.back().step == step) return;
    run_.loss_history.push_back(rec);
    if (!have_best_ || rec.total() < run_.best.total()) {
      have_best_ = true;
      run_.best = rec;
      best_params_ = params;
    }
  }

  bool has_best() const { return have_best_; }
  const Eigen::VectorXd& best_params() const { return best_params_; }

 private:
  TrainedPinn& run_;
  int every_;
  bool have_best_ = false;
  Eigen::VectorXd best_params_;
};

void train_adam(const PinnLoss& loss, const AdamConfig& cfg, TrainedPinn& run, Recorder& rec) {
  BatchTape<double> tape;
  Eigen::VectorXd params = run.network.params();
  Eigen::VectorXd grad;
  AdamState<double> state(params.size(), cfg.learning_rate);
  long step = 0;
  for (; step < cfg.max_steps; ++step) {
    const LossTerms terms = loss.value_and_gradient(run.network, tape, grad);
    if (!finite(terms) || !grad.allFinite()) {
      run.status = TrainStatus::NonFinite;
      run.steps = step;
      return;
    }
    rec.offer(step, terms, params);
    adam_step(state, params, grad);
    run.network.set_params(params);
  }
  run.steps = step;
  const LossTerms final_terms = loss.evaluate(run.network);
  if (finite(final_terms)) {
    rec.offer(step, final_terms, params, true);
  } else {
    run.status = TrainStatus::NonFinite;
  }
}

void train_lbfgs(const PinnLoss& loss, const LbfgsConfig& cfg, TrainedPinn& run, Recorder& rec, int every) {
  BatchTape<double> tape;
  LossTerms last;
  auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    run.network.set_params(x);
    last = loss.value_and_gradient(run.network, tape, g);
    return last.total();
  };
  LbfgsOptions options;
  options.memory = cfg.memory;
  options.max_iterations = cfg.max_iterations;
  options.gradient_tolerance = cfg.tolerance;
  const Eigen::VectorXd initial = run.network.params();
  // The zeroth record is the initial state.
  {
    Eigen::VectorXd g;
    fg(initial, g);
    if (finite(last)) rec.offer(0, last, initial, true);
  }
  const auto result = lbfgs_minimize<double>(
      initial, fg, options, [&](int iter, double, const Eigen::VectorXd& x) {
        // The accepted point is always the most recent evaluation.
        if (iter % every == 0) rec.offer(iter, last, x);
        return true;
      });
  run.steps = result.iterations;
  switch (result.status) {
    case LbfgsStatus::Converged: run.status = TrainStatus::Converged; break;
    case LbfgsStatus::LineSearchFailed: run.status = TrainStatus::LineSearchFailed; break;
    case LbfgsStatus::NonFinite: run.status = TrainStatus::NonFinite; break;
    default: run.status = TrainStatus::Completed; break;
  }
  run.network.set_params(result.params);
  const LossTerms final_terms = loss.evaluate(run.network);
  if (finite(final_terms)) rec.offer(result.iterations, final_terms, result.params, true);
}

bool same_problem(const SlabProblem& a, const SlabProblem& b) {
  if (a.order != b.order || a.bc_left != b.bc_left || a.bc_right != b.bc_right || a.scaling != b.scaling ||
      a.regions.size() != b.regions.size() || a.eps.has_value() != b.eps.has_value()) {
    return false;
  }
  if (a.eps && (a.eps->epsilon != b.eps->epsilon || a.eps->alpha != b.eps->alpha)) return false;
  for (std::size_t r = 0; r < a.regions.size(); ++r) {
    const auto& x = a.regions[r];
    const auto& y = b.regions[r];
    if (x.x_lo != y.x_lo || x.x_hi != y.x_hi || x.sigma_t != y.sigma_t || x.sigma_a != y.sigma_a ||
        x.q.coeffs != y.q.coeffs) {
      return false;
    }
  }
  return true;
}

}  // namespace

TrainedPinn train(const SlabProblem& problem, const PinnConfig& config, std::uint64_t seed) {
  const PinnLoss loss = build_loss(problem, config);
  const auto start = std::chrono::steady_clock::now();
  TrainedPinn run{make_network(problem, config), {}, {}, seed, config, problem};
  run.network.initialize(seed);
  Recorder rec(run, config.record_every);
  if (const auto* adam = std::get_if<AdamConfig>(&config.optimizer)) {
    train_adam(loss, *adam, run, rec);
  } else {
    train_lbfgs(loss, std::get<LbfgsConfig>(config.optimizer), run, rec, config.record_every);
  }
  if (rec.has_best()) run.network.set_params(rec.best_params());
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

std::vector<TrainedPinn> train_ensemble(const SlabProblem& problem, const PinnConfig& config) {
  config.validate();
  const int n = config.n_restarts();
  std::vector<std::optional<TrainedPinn>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(train(problem, config, config.seeds[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  std::vector<TrainedPinn> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

FluxSolution TrainedPinn::predict(const Eigen::Ref<const Eigen::VectorXd>& grid) const {
  const auto out = evaluate_batch(network, grid);
  FluxSolution sol;
  sol.x = grid;
  sol.moments = out.values.transpose();
  sol.metadata["solver"] = "pinn";
  sol.metadata["scaling"] = problem.scaling == ScalingMode::Diffusive ? "scaled" : "unscaled";
  sol.metadata["seed"] = std::to_string(seed);
  return sol;
}

FluxSolution ensemble_predict(const std::vector<TrainedPinn>& trained, const Eigen::Ref<const Eigen::VectorXd>& grid) {
  if (trained.empty()) throw Error(ErrorKind::InvalidArgument, "ensemble is empty");
  for (const auto& t : trained) {
    if (!same_problem(t.problem, trained.front().problem) ||
        t.network.layer_sizes() != trained.front().network.layer_sizes()) {
      throw Error(ErrorKind::InvalidArgument, "ensemble members were trained on different problems");
    }
  }
  FluxSolution sol = trained.front().predict(grid);
  for (std::size_t i = 1; i < trained.size(); ++i) sol.moments += trained[i].predict(grid).moments;
  sol.moments /= static_cast<double>(trained.size());
  std::string seeds;
  for (const auto& t : trained) seeds += (seeds.empty() ? "" : ",") + std::to_string(t.seed);
  sol.metadata["seed"] = seeds;
  return sol;
}

nlohmann::json to_json(const PinnConfig& c) {
  nlohmann::json j{{"hidden_layers", c.hidden_layers},
                   {"hidden_width", c.hidden_width},
                   {"activation", to_string(c.activation)},
                   {"n_interior_points", c.n_interior_points},
                   {"boundary_weight", c.boundary_weight},
                   {"seeds", c.seeds},
                   {"record_every", c.record_every}};
  if (const auto* adam = std::get_if<AdamConfig>(&c.optimizer)) {
    j["optimizer"] = {{"kind", "adam"}, {"learning_rate", adam->learning_rate}, {"max_steps", adam->max_steps}};
  } else {
    const auto& lb = std::get<LbfgsConfig>(c.optimizer);
    j["optimizer"] = {{"kind", "lbfgs"}, {"memory", lb.memory}, {"max_iterations", lb.max_iterations},
                      {"tolerance", lb.tolerance}};
  }
  return j;
}

nlohmann::json run_manifest(const std::vector<TrainedPinn>& trained) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& t : trained) {
    runs.push_back({{"seed", t.seed},
                    {"status", to_string(t.status)},
                    {"steps", t.steps},
                    {"best_step", t.best.step},
                    {"final_interior_loss", t.best.interior},
                    {"final_boundary_loss", t.best.boundary},
                    {"wall_seconds", t.wall_seconds}});
  }
  nlohmann::json j{{"runs", runs}};
  if (!trained.empty()) j["config"] = to_json(trained.front().config);
  return j;
}

}  // namespace pnlab

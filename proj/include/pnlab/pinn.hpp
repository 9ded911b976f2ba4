#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pnlab/flux.hpp"
#include "pnlab/mlp.hpp"
#include "pnlab/pn_model.hpp"

namespace pnlab {

struct AdamConfig {
  double learning_rate = 2.5e-4;
  long max_steps = 50000;
};

struct LbfgsConfig {
  int memory = 10;
  int max_iterations = 5000;
  double tolerance = 1e-12;
};

struct PinnConfig {
  int hidden_layers = 5;
  int hidden_width = 50;
  Activation activation = Activation::ReLU;
  int n_interior_points = 300;
  double boundary_weight = 1.0;
  std::variant<AdamConfig, LbfgsConfig> optimizer = AdamConfig{};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  /// Loss-history stride in optimizer steps.
  int record_every = 100;
  /// Concurrent restarts; 0 means hardware concurrency.
  int threads = 0;

  int n_restarts() const { return static_cast<int>(seeds.size()); }
  void validate() const;
};

struct LossTerms {
  double interior = 0.0;
  double boundary = 0.0;
  double total() const { return interior + boundary; }
};

/// Interior P_N residual at Sobol points plus the weighted boundary penalty.
///
/// The collocation set is the interior points followed by x_l and x_r; per
/// point coefficients (row scale, collision diagonal, source) are tabulated
/// once so the loss is a few dense array operations on the network outputs.
class PinnLoss {
 public:
  PinnLoss(const SlabProblem& problem, int n_interior, double boundary_weight);

  const Eigen::VectorXd& points() const { return points_; }
  Eigen::Index interior_count() const { return interior_; }
  int outputs() const { return static_cast<int>(streaming_.rows()); }
  double boundary_weight() const { return weight_; }
  const SlabProblem& problem() const { return problem_; }

  /// values/slopes are (N+1) x points(); partials are written when requested.
  LossTerms evaluate(const Eigen::Ref<const Eigen::MatrixXd>& values, const Eigen::Ref<const Eigen::MatrixXd>& slopes,
                     Eigen::MatrixXd* d_values = nullptr, Eigen::MatrixXd* d_slopes = nullptr) const;
  LossTerms evaluate(const MlpNetwork<double>& net) const;
  LossTerms value_and_gradient(const MlpNetwork<double>& net, BatchTape<double>& tape,
                               Eigen::VectorXd& gradient) const;

 private:
  void require_width(const MlpNetwork<double>& net) const;

  SlabProblem problem_;
  Eigen::Index interior_;
  double weight_;
  Eigen::VectorXd points_;
  Eigen::MatrixXd streaming_;
  Eigen::MatrixXd scale_;      // (N+1) x interior
  Eigen::MatrixXd collision_;  // (N+1) x interior
  Eigen::RowVectorXd source_;  // interior
  Eigen::MatrixXd b_left_;
  Eigen::MatrixXd b_right_;
};

PinnLoss build_loss(const SlabProblem& problem, const PinnConfig& config);

struct LossRecord {
  long step = 0;
  double interior = 0.0;
  double boundary = 0.0;
  double total() const { return interior + boundary; }
};

enum class TrainStatus { Completed, Converged, LineSearchFailed, NonFinite };
std::string_view to_string(TrainStatus status);

struct TrainedPinn {
  MlpNetwork<double> network;
  std::vector<LossRecord> loss_history;
  LossRecord best;
  std::uint64_t seed = 0;
  PinnConfig config;
  SlabProblem problem;
  TrainStatus status = TrainStatus::Completed;
  long steps = 0;
  double wall_seconds = 0.0;

  FluxSolution predict(const Eigen::Ref<const Eigen::VectorXd>& grid) const;
};

MlpNetwork<double> make_network(const SlabProblem& problem, const PinnConfig& config);

/// Seeded initialization, then the configured optimizer; returns the
/// parameters with the lowest recorded total loss.
TrainedPinn train(const SlabProblem& problem, const PinnConfig& config, std::uint64_t seed);

/// One training per seed, possibly concurrent; results in seed order.
std::vector<TrainedPinn> train_ensemble(const SlabProblem& problem, const PinnConfig& config);

/// Pointwise mean of the member predictions.
FluxSolution ensemble_predict(const std::vector<TrainedPinn>& trained, const Eigen::Ref<const Eigen::VectorXd>& grid);

nlohmann::json to_json(const PinnConfig& config);
nlohmann::json run_manifest(const std::vector<TrainedPinn>& trained);

}  // namespace pnlab

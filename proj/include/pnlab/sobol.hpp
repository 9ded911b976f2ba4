#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace pnlab {

/// Gray-code Sobol stream for dimensions 1 and 2 (Joe-Kuo direction numbers).
/// Index 0 is the all-zeros point.
class SobolStream {
 public:
  static constexpr int kBits = 32;
  static constexpr int kMaxDimension = 2;

  explicit SobolStream(int dimension, std::uint64_t start_index = 0);

  int dimension() const { return dimension_; }
  std::uint64_t index() const { return index_; }

  /// Current point, then advance.
  Eigen::VectorXd next();

 private:
  int dimension_;
  std::uint64_t index_;
  std::array<std::array<std::uint32_t, kBits>, kMaxDimension> direction_{};
  std::array<std::uint32_t, kMaxDimension> state_{};
};

/// First `count` Sobol points after the zero term, one point per row.
Eigen::MatrixXd sobol_points(int dimension, int count);

/// Points indices [first, first + count) of the stream, one point per row.
Eigen::MatrixXd sobol_block(int dimension, std::uint64_t first, int count);

/// Affine map u -> x_l + u (x_r - x_l).
Eigen::VectorXd map_to_domain(const Eigen::Ref<const Eigen::VectorXd>& unit, double x_l, double x_r);

}  // namespace pnlab

#include "pnlab/sobol.hpp"

#include <bit>

#include "pnlab/error.hpp"

namespace pnlab {

namespace {
constexpr double kTwoToMinus32 = 1.0 / 4294967296.0;
}

SobolStream::SobolStream(int dimension, std::uint64_t start_index) : dimension_(dimension), index_(0) {
  if (dimension < 1 || dimension > kMaxDimension) {
    throw Error(ErrorKind::UnsupportedDimension, "Sobol stream supports dimensions 1 and 2");
  }
  // Dimension 1: van der Corput, v_k = 2^-k.
  for (int k = 0; k < kBits; ++k) direction_[0][k] = 1u << (kBits - 1 - k);
  // Dimension 2: primitive polynomial x + 1 (s = 1, a = 0), m_1 = 1,
  // m_k = 2 m_{k-1} xor m_{k-1}.
  std::uint32_t m = 1;
  for (int k = 0; k < kBits; ++k) {
    if (k > 0) m = (m << 1) ^ m;
    direction_[1][k] = m << (kBits - 1 - k);
  }
  // Jump to start_index: state is the xor of directions over gray-code bits.
  const std::uint64_t gray = start_index ^ (start_index >> 1);
  for (int d = 0; d < kMaxDimension; ++d) {
    std::uint32_t s = 0;
    for (int k = 0; k < kBits; ++k) {
      if ((gray >> k) & 1u) s ^= direction_[d][k];
    }
    state_[d] = s;
  }
  index_ = start_index;
}

Eigen::VectorXd SobolStream::next() {
  Eigen::VectorXd point(dimension_);
  for (int d = 0; d < dimension_; ++d) point(d) = state_[d] * kTwoToMinus32;
  // Moving from i to i+1 flips the gray-code bit at the lowest zero bit of i.
  const int bit = std::countr_one(index_);
  if (bit >= kBits) throw Error(ErrorKind::InvalidArgument, "Sobol stream exhausted");
  for (int d = 0; d < kMaxDimension; ++d) state_[d] ^= direction_[d][bit];
  ++index_;
  return point;
}

Eigen::MatrixXd sobol_block(int dimension, std::uint64_t first, int count) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "Sobol point count must be >= 1");
  SobolStream stream(dimension, first);
  Eigen::MatrixXd points(count, dimension);
  for (int i = 0; i < count; ++i) points.row(i) = stream.next().transpose();
  return points;
}

Eigen::MatrixXd sobol_points(int dimension, int count) { return sobol_block(dimension, 1, count); }

Eigen::VectorXd map_to_domain(const Eigen::Ref<const Eigen::VectorXd>& unit, double x_l, double x_r) {
  if (!(x_l < x_r)) throw Error(ErrorKind::InvalidArgument, "map_to_domain needs x_l < x_r");
  return (x_l + (x_r - x_l) * unit.array()).matrix();
}

}  // namespace pnlab

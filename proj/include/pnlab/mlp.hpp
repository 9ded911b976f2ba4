#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pnlab/error.hpp"

namespace pnlab {

enum class Activation { ReLU, Tanh };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// Fully connected network x -> R^{n_out}.
///
/// Parameters live in one flat vector, layer-major: for m = 1..M the weight
/// matrix W^m (column-major, N_m x N_{m-1}) followed by the bias b^m. The
/// input is mapped affinely to [-1, 1] before the first layer; the hidden
/// layers apply the activation, the output layer is linear.
template <typename Scalar>
class MlpNetwork {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  MlpNetwork(std::vector<int> layer_sizes, Activation activation, Scalar x_lo = Scalar(-1),
             Scalar x_hi = Scalar(1))
      : sizes_(std::move(layer_sizes)), activation_(activation) {
    if (sizes_.size() < 2 || sizes_.front() != 1) {
      throw Error(ErrorKind::InvalidArgument, "network needs layer sizes (1, ..., n_out)");
    }
    for (int s : sizes_) {
      if (s < 1) throw Error(ErrorKind::InvalidArgument, "layer sizes must be positive");
    }
    if (!(x_lo < x_hi)) throw Error(ErrorKind::InvalidArgument, "network input interval is empty");
    center_ = (x_lo + x_hi) / 2;
    scale_ = Scalar(2) / (x_hi - x_lo);
    Eigen::Index offset = 0;
    for (std::size_t m = 1; m < sizes_.size(); ++m) {
      offsets_.push_back(offset);
      offset += static_cast<Eigen::Index>(sizes_[m]) * (sizes_[m - 1] + 1);
    }
    params_ = Vector::Zero(offset);
  }

  MlpNetwork(int hidden_layers, int width, int outputs, Activation activation, Scalar x_lo, Scalar x_hi)
      : MlpNetwork(make_sizes(hidden_layers, width, outputs), activation, x_lo, x_hi) {}

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int output_dim() const { return sizes_.back(); }
  Activation activation() const { return activation_; }
  Scalar input_center() const { return center_; }
  Scalar input_scale() const { return scale_; }
  Scalar x_lo() const { return center_ - 1 / scale_; }
  Scalar x_hi() const { return center_ + 1 / scale_; }

  Eigen::Index num_params() const { return params_.size(); }
  const Vector& params() const { return params_; }
  void set_params(const Vector& p) {
    if (p.size() != params_.size()) throw Error(ErrorKind::ShapeMismatch, "parameter vector length mismatch");
    params_ = p;
  }

  /// Layer index l is 0-based: weight(0) is W^1.
  Eigen::Map<const Matrix> weight(int l) const {
    return Eigen::Map<const Matrix>(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  Eigen::Map<Matrix> weight(int l) { return Eigen::Map<Matrix>(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]); }
  Eigen::Map<const Vector> bias(int l) const {
    return Eigen::Map<const Vector>(params_.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l],
                                    sizes_[l + 1]);
  }
  Eigen::Map<Vector> bias(int l) {
    return Eigen::Map<Vector>(params_.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]);
  }
  Eigen::Index weight_offset(int l) const { return offsets_[l]; }
  Eigen::Index bias_offset(int l) const { return offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l]; }

  /// Glorot-uniform (Tanh) or He-uniform (ReLU) weights, zero biases.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params_.setZero();
    for (int l = 0; l < num_layers(); ++l) {
      const double fan_in = sizes_[l];
      const double fan_out = sizes_[l + 1];
      const double limit = activation_ == Activation::Tanh ? std::sqrt(6.0 / (fan_in + fan_out))
                                                            : std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> dist(-limit, limit);
      auto w = weight(l);
      // Fill column-major so the draw order matches the flat layout.
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(dist(rng));
      }
    }
  }

 private:
  static std::vector<int> make_sizes(int hidden_layers, int width, int outputs) {
    std::vector<int> sizes{1};
    for (int i = 0; i < hidden_layers; ++i) sizes.push_back(width);
    sizes.push_back(outputs);
    return sizes;
  }

  std::vector<int> sizes_;
  Activation activation_;
  Vector params_;
  std::vector<Eigen::Index> offsets_;
  Scalar center_ = 0;
  Scalar scale_ = 1;
};

/// Outputs and their x-derivatives at a batch of points; column j belongs to
/// input point j.
template <typename Scalar>
struct BatchOutput {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> slopes;
};

/// Forward pass carrying the x-tangent alongside the value, with the
/// intermediates kept for reverse accumulation. Each layer buffer stores the
/// values in the left P columns and the tangents in the right P columns so a
/// single GEMM advances both.
template <typename Scalar>
class BatchTape {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  const BatchOutput<Scalar>& forward(const MlpNetwork<Scalar>& net, const Eigen::Ref<const Vector>& xs) {
    const int layers = net.num_layers();
    const Eigen::Index p = xs.size();
    points_ = p;
    pre_.resize(layers - 1);
    post_.resize(layers);

    // post_[0] is the normalized input and its tangent ds/dx.
    post_[0].resize(1, 2 * p);
    post_[0].leftCols(p) = (net.input_scale() * (xs.array() - net.input_center())).matrix().transpose();
    post_[0].rightCols(p).setConstant(net.input_scale());

    for (int l = 0; l < layers - 1; ++l) {
      Matrix& z = pre_[l];
      z.resize(net.layer_sizes()[l + 1], 2 * p);
      z.noalias() = net.weight(l) * post_[l];
      z.leftCols(p).colwise() += net.bias(l);
      Matrix& a = post_[l + 1];
      a.resize(z.rows(), 2 * p);
      if (net.activation() == Activation::ReLU) {
        a.leftCols(p) = z.leftCols(p).cwiseMax(Scalar(0));
        a.rightCols(p) = (z.leftCols(p).array() > Scalar(0)).select(z.rightCols(p), Scalar(0));
      } else {
        a.leftCols(p) = z.leftCols(p).array().tanh().matrix();
        a.rightCols(p) = ((Scalar(1) - a.leftCols(p).array().square()) * z.rightCols(p).array()).matrix();
      }
    }
    const int last = layers - 1;
    Matrix out;
    out.noalias() = net.weight(last) * post_[last];
    output_.values = out.leftCols(p);
    output_.values.colwise() += net.bias(last);
    output_.slopes = out.rightCols(p);
    return output_;
  }

  /// Gradient of a scalar loss whose partials with respect to the outputs and
  /// slopes of the last forward() call are d_values and d_slopes.
  void backward(const MlpNetwork<Scalar>& net, const Eigen::Ref<const Matrix>& d_values,
                const Eigen::Ref<const Matrix>& d_slopes, Vector& gradient) {
    const int layers = net.num_layers();
    const Eigen::Index p = points_;
    gradient.resize(net.num_params());

    adj_.resize(net.output_dim(), 2 * p);
    adj_.leftCols(p) = d_values;
    adj_.rightCols(p) = d_slopes;

    for (int l = layers - 1; l >= 0; --l) {
      // adj_ holds the adjoint of the pre-activation of layer l+1 (values|tangents).
      Eigen::Map<Matrix> dw(gradient.data() + net.weight_offset(l), net.layer_sizes()[l + 1], net.layer_sizes()[l]);
      dw.noalias() = adj_ * post_[l].transpose();
      Eigen::Map<Vector>(gradient.data() + net.bias_offset(l), net.layer_sizes()[l + 1]) =
          adj_.leftCols(p).rowwise().sum();
      if (l == 0) break;

      upstream_.resize(net.layer_sizes()[l], 2 * p);
      upstream_.noalias() = net.weight(l).transpose() * adj_;
      const Matrix& z = pre_[l - 1];
      adj_.resize(upstream_.rows(), 2 * p);
      if (net.activation() == Activation::ReLU) {
        const auto on = (z.leftCols(p).array() > Scalar(0));
        adj_.leftCols(p) = on.select(upstream_.leftCols(p), Scalar(0));
        adj_.rightCols(p) = on.select(upstream_.rightCols(p), Scalar(0));
      } else {
        const auto t = post_[l].leftCols(p).array();
        const auto d1 = (Scalar(1) - t.square()).eval();
        adj_.leftCols(p) = (upstream_.leftCols(p).array() * d1 +
                            upstream_.rightCols(p).array() * (Scalar(-2) * t * d1) * z.rightCols(p).array())
                               .matrix();
        adj_.rightCols(p) = (upstream_.rightCols(p).array() * d1).matrix();
      }
    }
  }

  const BatchOutput<Scalar>& output() const { return output_; }

 private:
  Eigen::Index points_ = 0;
  std::vector<Matrix> pre_;
  std::vector<Matrix> post_;
  Matrix adj_;
  Matrix upstream_;
  BatchOutput<Scalar> output_;
};

template <typename Scalar>
BatchOutput<Scalar> evaluate_batch(const MlpNetwork<Scalar>& net,
                                   const Eigen::Ref<const typename MlpNetwork<Scalar>::Vector>& xs) {
  BatchTape<Scalar> tape;
  return tape.forward(net, xs);
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const MlpNetwork<Scalar>& net, Scalar x) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector a(1);
  a(0) = net.input_scale() * (x - net.input_center());
  for (int l = 0; l < net.num_layers(); ++l) {
    Vector z = net.weight(l) * a + net.bias(l);
    if (l + 1 == net.num_layers()) return z;
    a = net.activation() == Activation::ReLU ? Vector(z.cwiseMax(Scalar(0))) : Vector(z.array().tanh().matrix());
  }
  return a;
}

/// Value and exact d/dx of the network at one point (ReLU'(0) taken as 0).
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
forward_with_x_derivative(const MlpNetwork<Scalar>& net, Scalar x) {
  Eigen::Matrix<Scalar, 1, 1> xs;
  xs(0) = x;
  const auto out = evaluate_batch(net, xs);
  return {out.values.col(0), out.slopes.col(0)};
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient;
};

/// Exact parameter gradient of loss(values, slopes) over the point set xs.
/// `loss_fn(values, slopes, d_values, d_slopes)` returns the loss and fills
/// its partial derivatives with respect to the network outputs and slopes.
template <typename Scalar, typename LossFn>
LossAndGradient<Scalar> loss_gradient(const MlpNetwork<Scalar>& net,
                                      const Eigen::Ref<const typename MlpNetwork<Scalar>::Vector>& xs,
                                      LossFn&& loss_fn) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  BatchTape<Scalar> tape;
  const auto& out = tape.forward(net, xs);
  Matrix d_values = Matrix::Zero(out.values.rows(), out.values.cols());
  Matrix d_slopes = Matrix::Zero(out.slopes.rows(), out.slopes.cols());
  LossAndGradient<Scalar> result;
  result.loss = loss_fn(out.values, out.slopes, d_values, d_slopes);
  tape.backward(net, d_values, d_slopes, result.gradient);
  return result;
}

}  // namespace pnlab

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wqdil/random.hpp"

namespace wqdil::nn {

/// Flat parameter vector. Layer by layer: weights (out x in, row-major),
/// then biases.
using ParamVector = std::vector<double>;

/// Row-major batch matrix; one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fully connected network: tanh on hidden layers, identity on the output.
class MlpSpec {
 public:
  MlpSpec() = default;
  explicit MlpSpec(std::vector<int> widths);

  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  int layer_count() const { return static_cast<int>(widths_.size()) - 1; }
  std::size_t param_count() const { return param_count_; }

  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(widths_[layer]) * widths_[layer + 1];
  }

  bool operator==(const MlpSpec& o) const { return widths_ == o.widths_; }

 private:
  std::vector<int> widths_;
  std::vector<std::size_t> offsets_;
  std::size_t param_count_ = 0;
};

struct Layer {
  Matrix weight;  // out x in
  Eigen::VectorXd bias;
};

std::vector<Layer> unflatten(const MlpSpec& spec, std::span<const double> params);
ParamVector flatten(const MlpSpec& spec, const std::vector<Layer>& layers);

/// Deterministic initialization: uniform(-1, 1) * sqrt(3 / fan_in) scaled by
/// `gain` on hidden layers and `output_scale` on the last layer; biases 0.
ParamVector init_params(const MlpSpec& spec, Random& rng, double output_scale = 1.0,
                        double gain = 1.0);

/// Activations of one batched forward pass, kept for backpropagation.
struct Tape {
  std::vector<Matrix> activations;  // [0] = input, back() = output

  const Matrix& output() const { return activations.back(); }
};

Matrix forward(const MlpSpec& spec, std::span<const double> params, const Matrix& inputs);
void forward(const MlpSpec& spec, std::span<const double> params, const Matrix& inputs, Tape& tape);

/// Reverse pass for sum_r <upstream_r, output_r>. Parameter gradients are
/// accumulated into `param_grad`; input gradients are written when requested.
void backward(const MlpSpec& spec, std::span<const double> params, const Tape& tape,
              const Matrix& upstream, std::span<double> param_grad,
              Matrix* input_grad = nullptr);

/// Parameter gradient of sum_r <upstream_r, J(x_r) direction_r>, where J is
/// the input Jacobian of the network. With `direction` the derivative of a
/// penalty on input gradients, this is the penalty's parameter gradient.
void input_jvp_backward(const MlpSpec& spec, std::span<const double> params,
                        const Matrix& inputs, const Matrix& directions,
                        const Matrix& upstream, std::span<double> param_grad);

std::vector<double> forward(const MlpSpec& spec, std::span<const double> params,
                            std::span<const double> input);

struct Gradients {
  ParamVector params;
  std::vector<double> input;
};

/// Exact gradients of <upstream, forward(input)>.
Gradients grad(const MlpSpec& spec, std::span<const double> params,
               std::span<const double> input, std::span<const double> upstream);

Matrix as_row(std::span<const double> v);

}  // namespace wqdil::nn

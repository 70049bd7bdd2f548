#include "wqdil/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wqdil::nn {

namespace {

using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using MatrixMap = Eigen::Map<Matrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

// Parameters live in plain vectors whose addresses vary from run to run.
// Eigen picks packet or scalar (fused vs unfused multiply-add) paths by
// runtime alignment, so products on mapped parameter memory are not
// reproducible. Weights are copied into aligned storage before any product
// and gradients are formed in aligned temporaries before accumulation.
Matrix weight(const MlpSpec& spec, std::span<const double> params, int l) {
  return ConstMatrixMap(params.data() + spec.weight_offset(l), spec.widths()[l + 1],
                        spec.widths()[l]);
}

ConstVectorMap bias(const MlpSpec& spec, std::span<const double> params, int l) {
  return ConstVectorMap(params.data() + spec.bias_offset(l), spec.widths()[l + 1]);
}

// tanh through the vectorized exp; libm tanh dominates rollout cost otherwise.
void tanh_inplace(Matrix& m) {
  auto x = m.array().max(-20.0).min(20.0);
  const Matrix e = (2.0 * x).exp().matrix();
  m = ((e.array() - 1.0) / (e.array() + 1.0)).matrix();
}

void check_params(const MlpSpec& spec, std::span<const double> params) {
  if (params.size() != spec.param_count()) {
    throw std::invalid_argument("mlp: expected " + std::to_string(spec.param_count()) +
                                " parameters, got " + std::to_string(params.size()));
  }
}

void check_inputs(const MlpSpec& spec, const Matrix& inputs) {
  if (inputs.cols() != spec.input_width()) {
    throw std::invalid_argument("mlp: input width " + std::to_string(inputs.cols()) +
                                " does not match spec width " +
                                std::to_string(spec.input_width()));
  }
}

}  // namespace

MlpSpec::MlpSpec(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("MlpSpec: need at least two widths");
  for (int w : widths_) {
    if (w <= 0) throw std::invalid_argument("MlpSpec: widths must be positive");
  }
  std::size_t offset = 0;
  for (int l = 0; l + 1 < static_cast<int>(widths_.size()); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(widths_[l] + 1) * widths_[l + 1];
  }
  param_count_ = offset;
}

std::vector<Layer> unflatten(const MlpSpec& spec, std::span<const double> params) {
  check_params(spec, params);
  std::vector<Layer> layers;
  for (int l = 0; l < spec.layer_count(); ++l) {
    layers.push_back({weight(spec, params, l), bias(spec, params, l)});
  }
  return layers;
}

ParamVector flatten(const MlpSpec& spec, const std::vector<Layer>& layers) {
  if (static_cast<int>(layers.size()) != spec.layer_count()) {
    throw std::invalid_argument("flatten: layer count mismatch");
  }
  ParamVector params(spec.param_count());
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.widths()[l], out = spec.widths()[l + 1];
    if (layers[l].weight.rows() != out || layers[l].weight.cols() != in ||
        layers[l].bias.size() != out) {
      throw std::invalid_argument("flatten: layer shape mismatch");
    }
    MatrixMap(params.data() + spec.weight_offset(l), out, in) = layers[l].weight;
    VectorMap(params.data() + spec.bias_offset(l), out) = layers[l].bias;
  }
  return params;
}

ParamVector init_params(const MlpSpec& spec, Random& rng, double output_scale, double gain) {
  ParamVector params(spec.param_count(), 0.0);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.widths()[l], out = spec.widths()[l + 1];
    const double scale =
        std::sqrt(3.0 / in) * (l + 1 == spec.layer_count() ? output_scale : gain);
    double* w = params.data() + spec.weight_offset(l);
    for (int i = 0; i < in * out; ++i) w[i] = rng.uniform(-1.0, 1.0) * scale;
  }
  return params;
}

void forward(const MlpSpec& spec, std::span<const double> params, const Matrix& inputs,
             Tape& tape) {
  check_params(spec, params);
  check_inputs(spec, inputs);
  const int layers = spec.layer_count();
  tape.activations.resize(layers + 1);
  tape.activations[0] = inputs;
  for (int l = 0; l < layers; ++l) {
    Matrix& out = tape.activations[l + 1];
    const Matrix w = weight(spec, params, l);
    out.noalias() = tape.activations[l] * w.transpose();
    out.rowwise() += bias(spec, params, l).transpose();
    if (l + 1 < layers) tanh_inplace(out);
  }
}

Matrix forward(const MlpSpec& spec, std::span<const double> params, const Matrix& inputs) {
  Tape tape;
  forward(spec, params, inputs, tape);
  return std::move(tape.activations.back());
}

void backward(const MlpSpec& spec, std::span<const double> params, const Tape& tape,
              const Matrix& upstream, std::span<double> param_grad, Matrix* input_grad) {
  check_params(spec, params);
  if (param_grad.size() != spec.param_count()) {
    throw std::invalid_argument("mlp backward: gradient buffer size mismatch");
  }
  const int layers = spec.layer_count();
  if (upstream.cols() != spec.output_width() || upstream.rows() != tape.output().rows()) {
    throw std::invalid_argument("mlp backward: upstream shape mismatch");
  }
  Matrix g = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& h_in = tape.activations[l];
    const int in = spec.widths()[l], out = spec.widths()[l + 1];
    const Matrix dw = g.transpose() * h_in;
    const Eigen::VectorXd db = g.colwise().sum().transpose();
    MatrixMap(param_grad.data() + spec.weight_offset(l), out, in) += dw;
    VectorMap(param_grad.data() + spec.bias_offset(l), out) += db;
    if (l == 0 && input_grad == nullptr) break;
    Matrix g_in = g * weight(spec, params, l);
    if (l == 0) {
      *input_grad = std::move(g_in);
      break;
    }
    g = g_in.array() * (1.0 - h_in.array().square());
  }
}

void input_jvp_backward(const MlpSpec& spec, std::span<const double> params,
                        const Matrix& inputs, const Matrix& directions,
                        const Matrix& upstream, std::span<double> param_grad) {
  check_params(spec, params);
  check_inputs(spec, inputs);
  if (directions.rows() != inputs.rows() || directions.cols() != inputs.cols()) {
    throw std::invalid_argument("input_jvp_backward: direction shape mismatch");
  }
  if (upstream.rows() != inputs.rows() || upstream.cols() != spec.output_width()) {
    throw std::invalid_argument("input_jvp_backward: upstream shape mismatch");
  }
  const int layers = spec.layer_count();
  // Primal activations h, tangents hd, tangent pre-activations ad.
  std::vector<Matrix> h(layers + 1), hd(layers + 1), ad(layers + 1);
  h[0] = inputs;
  hd[0] = directions;
  for (int l = 0; l < layers; ++l) {
    const Matrix w = weight(spec, params, l);
    Matrix a = h[l] * w.transpose();
    a.rowwise() += bias(spec, params, l).transpose();
    ad[l + 1] = hd[l] * w.transpose();
    if (l + 1 < layers) {
      tanh_inplace(a);
      h[l + 1] = std::move(a);
      hd[l + 1] = (1.0 - h[l + 1].array().square()) * ad[l + 1].array();
    } else {
      h[l + 1] = std::move(a);
      hd[l + 1] = ad[l + 1];
    }
  }
  // Adjoints of the primal (g) and tangent (gd) pre-activations.
  Matrix g = Matrix::Zero(inputs.rows(), spec.output_width());
  Matrix gd = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = spec.widths()[l], out = spec.widths()[l + 1];
    Matrix dw = g.transpose() * h[l];
    dw.noalias() += gd.transpose() * hd[l];
    const Eigen::VectorXd db = g.colwise().sum().transpose();
    MatrixMap(param_grad.data() + spec.weight_offset(l), out, in) += dw;
    VectorMap(param_grad.data() + spec.bias_offset(l), out) += db;
    if (l == 0) break;
    const Matrix w = weight(spec, params, l);
    const Matrix h_adj = g * w;
    const Matrix hd_adj = gd * w;
    const auto s = (1.0 - h[l].array().square()).eval();
    gd = hd_adj.array() * s;
    g = h_adj.array() * s - 2.0 * hd_adj.array() * ad[l].array() * h[l].array() * s;
  }
}

Matrix as_row(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::vector<double> forward(const MlpSpec& spec, std::span<const double> params,
                            std::span<const double> input) {
  const Matrix out = forward(spec, params, as_row(input));
  return {out.data(), out.data() + out.size()};
}

Gradients grad(const MlpSpec& spec, std::span<const double> params,
               std::span<const double> input, std::span<const double> upstream) {
  if (upstream.size() != static_cast<std::size_t>(spec.output_width())) {
    throw std::invalid_argument("grad: upstream width mismatch");
  }
  Tape tape;
  forward(spec, params, as_row(input), tape);
  Gradients g;
  g.params.assign(spec.param_count(), 0.0);
  Matrix input_grad;
  backward(spec, params, tape, as_row(upstream), g.params, &input_grad);
  g.input.assign(input_grad.data(), input_grad.data() + input_grad.size());
  return g;
}

}  // namespace wqdil::nn

// SPDX-License-Identifier: Apache-2.0
#include "adflow/mlp.hpp"

#include <cmath>

#include "adflow/errors.hpp"

namespace adflow {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;
using Weights = Eigen::Map<RowMajor>;
using ConstBias = Eigen::Map<const Eigen::VectorXd>;
using Bias = Eigen::Map<Eigen::VectorXd>;

}  // namespace

std::size_t ParamLayout::add(std::string name, int rows, int cols) {
  if (rows < 0 || cols < 0) {
    throw ParameterError("tensor dimensions must be non-negative");
  }
  TensorSpec spec{std::move(name), rows, cols, size_};
  size_ += spec.size();
  tensors_.push_back(std::move(spec));
  return tensors_.back().offset;
}

Mlp::Mlp(ParamLayout& layout, const std::string& prefix, std::vector<int> dims)
    : dims_(std::move(dims)) {
  for (int d : dims_) {
    if (d <= 0) throw ParameterError("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    Layer layer;
    layer.in = dims_[l];
    layer.out = dims_[l + 1];
    const std::string tag = prefix + "." + std::to_string(l);
    layer.w_offset = layout.add(tag + ".weight", layer.out, layer.in);
    layer.b_offset = layout.add(tag + ".bias", layer.out, 1);
    layers_.push_back(layer);
  }
}

void Mlp::init(std::span<double> params, Rng& rng) const {
  for (const auto& layer : layers_) {
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    const auto n = static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out);
    for (std::size_t i = 0; i < n; ++i) {
      params[layer.w_offset + i] = rng.uniform(-bound, bound);
    }
    for (int i = 0; i < layer.out; ++i) {
      params[layer.b_offset + static_cast<std::size_t>(i)] = 0.0;
    }
  }
}

void Mlp::forward(std::span<const double> params, std::span<const double> input,
                  Trace& trace) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw ShapeError("mlp input has " + std::to_string(input.size()) + " values, expected " +
                     std::to_string(input_dim()));
  }
  trace.act.resize(layers_.size() + 1);
  trace.act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const auto& a = trace.act[l];
    auto& z = trace.act[l + 1];
    z.assign(static_cast<std::size_t>(layer.out), 0.0);
    const bool hidden = l + 1 < layers_.size();
    for (int o = 0; o < layer.out; ++o) {
      const double* w = params.data() + layer.w_offset +
                        static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in);
      double acc = params[layer.b_offset + static_cast<std::size_t>(o)];
      for (int i = 0; i < layer.in; ++i) acc += w[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = hidden ? std::tanh(acc) : acc;
    }
  }
}

void Mlp::backward(std::span<const double> params, const Trace& trace,
                   std::span<const double> grad_output, std::span<double> grad_params,
                   std::span<double> grad_input) const {
  std::vector<double> g(grad_output.begin(), grad_output.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const auto& a_in = trace.act[l];
    const auto& a_out = trace.act[l + 1];
    if (l + 1 < layers_.size()) {
      for (int o = 0; o < layer.out; ++o) {
        const double y = a_out[static_cast<std::size_t>(o)];
        g[static_cast<std::size_t>(o)] *= 1.0 - y * y;
      }
    }
    for (int o = 0; o < layer.out; ++o) {
      const double go = g[static_cast<std::size_t>(o)];
      double* gw = grad_params.data() + layer.w_offset +
                   static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) gw[i] += go * a_in[static_cast<std::size_t>(i)];
      grad_params[layer.b_offset + static_cast<std::size_t>(o)] += go;
    }
    if (l == 0 && grad_input.empty()) break;
    std::vector<double> g_prev(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double go = g[static_cast<std::size_t>(o)];
      const double* w = params.data() + layer.w_offset +
                        static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in);
      for (int i = 0; i < layer.in; ++i) g_prev[static_cast<std::size_t>(i)] += w[i] * go;
    }
    g = std::move(g_prev);
  }
  if (!grad_input.empty()) {
    for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] = g[i];
  }
}

void Mlp::forward_block(std::span<const double> params, const Matrix& input,
                        BlockTrace& trace) const {
  if (input.rows() != input_dim()) {
    throw ShapeError("mlp block input has wrong row count");
  }
  trace.act.resize(layers_.size() + 1);
  trace.act[0] = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ConstWeights w(params.data() + layer.w_offset, layer.out, layer.in);
    ConstBias b(params.data() + layer.b_offset, layer.out);
    Matrix z = w * trace.act[l];
    z.colwise() += b;
    if (l + 1 < layers_.size()) {
      z = z.array().tanh().matrix();
    }
    trace.act[l + 1] = std::move(z);
  }
}

void Mlp::backward_block(std::span<const double> params, const BlockTrace& trace,
                         const Matrix& grad_output, std::span<double> grad_params,
                         Matrix* grad_input) const {
  Matrix g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    if (l + 1 < layers_.size()) {
      g.array() *= 1.0 - trace.act[l + 1].array().square();
    }
    Weights gw(grad_params.data() + layer.w_offset, layer.out, layer.in);
    Bias gb(grad_params.data() + layer.b_offset, layer.out);
    gw.noalias() += g * trace.act[l].transpose();
    gb += g.rowwise().sum();
    if (l == 0 && grad_input == nullptr) break;
    ConstWeights w(params.data() + layer.w_offset, layer.out, layer.in);
    Matrix g_prev = w.transpose() * g;
    g = std::move(g_prev);
  }
  if (grad_input != nullptr) {
    *grad_input = std::move(g);
  }
}

}  // namespace adflow

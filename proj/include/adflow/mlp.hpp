// SPDX-License-Identifier: Apache-2.0
//
// Affine + tanh stacks over a flat parameter vector.
//
// All trainable parameters of a model live in one contiguous
// std::vector<double>; a ParamLayout records where each tensor starts. Every
// layer is y = W a + b with W stored row-major (out x in); hidden layers apply
// tanh, the last layer is linear.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adflow/rng.hpp"

namespace adflow {

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
};

class ParamLayout {
 public:
  /// Appends a rows x cols tensor and returns its offset.
  std::size_t add(std::string name, int rows, int cols);

  const std::vector<TensorSpec>& tensors() const noexcept { return tensors_; }
  std::size_t size() const noexcept { return size_; }

 private:
  std::vector<TensorSpec> tensors_;
  std::size_t size_ = 0;
};

/// Column-major; one example per column.
using Matrix = Eigen::MatrixXd;

class Mlp {
 public:
  Mlp() = default;

  /// Registers weights and biases for every consecutive pair in dims.
  Mlp(ParamLayout& layout, const std::string& prefix, std::vector<int> dims);

  int input_dim() const noexcept { return dims_.empty() ? 0 : dims_.front(); }
  int output_dim() const noexcept { return dims_.empty() ? 0 : dims_.back(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const std::vector<int>& dims() const noexcept { return dims_; }
  bool empty() const noexcept { return layers_.empty(); }

  /// Glorot-uniform weights, zero biases.
  void init(std::span<double> params, Rng& rng) const;

  // Single-example path (reference).
  struct Trace {
    std::vector<std::vector<double>> act;  // act[0] = input, act.back() = output
  };
  void forward(std::span<const double> params, std::span<const double> input,
               Trace& trace) const;
  /// Accumulates into grad_params; writes grad_input when non-empty.
  void backward(std::span<const double> params, const Trace& trace,
                std::span<const double> grad_output, std::span<double> grad_params,
                std::span<double> grad_input) const;

  // Blocked path: examples are columns.
  struct BlockTrace {
    std::vector<Matrix> act;
  };
  void forward_block(std::span<const double> params, const Matrix& input,
                     BlockTrace& trace) const;
  void backward_block(std::span<const double> params, const BlockTrace& trace,
                      const Matrix& grad_output, std::span<double> grad_params,
                      Matrix* grad_input) const;

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t w_offset = 0;
    std::size_t b_offset = 0;
  };

  std::vector<int> dims_;
  std::vector<Layer> layers_;
};

}  // namespace adflow

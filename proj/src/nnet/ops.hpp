#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace rscope::nnet {

// Batched kernels with explicit backward passes. Shapes:
//   linear   x [N,din], W [din,dout], b [dout]          -> [N,dout]
//   conv1d   x [C_in,L] or [N,C_in,L], f [C_out,C_in,K] -> [(N,)C_out,L_out]
//   maxpool  x [C,L] or [N,C,L]                          -> [(N,)C,L_out]
// Convolution and pooling are "valid": no padding, L_out = (L - K) / s + 1.

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

struct LinearGrads {
  Tensor dx;
  Tensor dW;
  Tensor db;
};
LinearGrads linear_backward(const Tensor& x, const Tensor& W, const Tensor& dy);

Tensor relu(const Tensor& x);
/// Passes dy where x > 0; the subgradient at 0 is 0.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

std::size_t window_output_length(std::size_t length, std::size_t kernel, std::size_t stride);

Tensor conv1d(const Tensor& x, const Tensor& filters, std::size_t stride);

struct Conv1dGrads {
  Tensor dx;
  Tensor dfilters;
};
Conv1dGrads conv1d_backward(const Tensor& x, const Tensor& filters, std::size_t stride,
                            const Tensor& dy);

struct PoolResult {
  Tensor y;
  std::vector<std::size_t> argmax;  // flat index into x for each output element
};
/// Max over each window; ties select the earliest position.
PoolResult maxpool1d(const Tensor& x, std::size_t kernel = 8, std::size_t stride = 2);
Tensor maxpool1d_backward(const std::vector<std::size_t>& x_shape,
                          const std::vector<std::size_t>& argmax, const Tensor& dy);

/// Row-wise softmax of [N,K] logits.
Tensor softmax(const Tensor& logits);

struct LossResult {
  double loss = 0.0;  // mean over the batch
  Tensor dlogits;     // (softmax - onehot) / N
};
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

namespace detail {

// im2col helpers shared by the conv layer, which caches the column matrix.
struct ConvGeometry {
  std::size_t batch, in_channels, length, out_channels, kernel, stride, out_length;
};
ConvGeometry conv_geometry(const Tensor& x, const Tensor& filters, std::size_t stride);
RowMatrix im2col(const Tensor& x, const ConvGeometry& g);
Tensor conv_forward_cols(const RowMatrix& cols, const Tensor& filters, const ConvGeometry& g,
                         const std::vector<std::size_t>& out_shape);
Conv1dGrads conv_backward_cols(const RowMatrix& cols, const Tensor& filters, const ConvGeometry& g,
                               const std::vector<std::size_t>& x_shape, const Tensor& dy);

}  // namespace detail

}  // namespace rscope::nnet

#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rscope::nnet {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

std::vector<std::size_t> batched_shape(const Tensor& x, std::size_t& batch, std::size_t& channels,
                                       std::size_t& length) {
  if (x.rank() == 2) {
    batch = 1, channels = x.dim(0), length = x.dim(1);
  } else if (x.rank() == 3) {
    batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  } else {
    throw ShapeMismatch("expected [C,L] or [N,C,L], got " + x.shape_string());
  }
  return x.shape();
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
  require(x.rank() == 2 && W.rank() == 2 && b.rank() == 1, "linear expects x[N,din], W[din,dout], b[dout]");
  require(x.dim(1) == W.dim(0), "linear: x " + x.shape_string() + " vs W " + W.shape_string());
  require(b.dim(0) == W.dim(1), "linear: b " + b.shape_string() + " vs W " + W.shape_string());
  Tensor y({x.dim(0), W.dim(1)});
  auto Y = y.matrix();
  Y.noalias() = x.matrix() * W.matrix();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), static_cast<Eigen::Index>(b.size()));
  return y;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& W, const Tensor& dy) {
  require(dy.rank() == 2 && dy.dim(0) == x.dim(0) && dy.dim(1) == W.dim(1),
          "linear_backward: dy " + dy.shape_string());
  LinearGrads g{Tensor(x.shape()), Tensor(W.shape()), Tensor({W.dim(1)})};
  g.dx.matrix().noalias() = dy.matrix() * W.matrix().transpose();
  g.dW.matrix().noalias() = x.matrix().transpose() * dy.matrix();
  Eigen::Map<Eigen::RowVectorXd>(g.db.data().data(), static_cast<Eigen::Index>(g.db.size())) =
      dy.matrix().colwise().sum();
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require(x.size() == dy.size(), "relu_backward size mismatch");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

std::size_t window_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0) throw ShapeMismatch("kernel and stride must be positive");
  if (length < kernel) {
    throw ShapeMismatch("input length " + std::to_string(length) + " shorter than kernel " +
                        std::to_string(kernel));
  }
  return (length - kernel) / stride + 1;
}

namespace detail {

ConvGeometry conv_geometry(const Tensor& x, const Tensor& filters, std::size_t stride) {
  ConvGeometry g{};
  batched_shape(x, g.batch, g.in_channels, g.length);
  require(filters.rank() == 3, "conv1d filters must be [C_out,C_in,K], got " + filters.shape_string());
  require(filters.dim(1) == g.in_channels, "conv1d: input channels " + std::to_string(g.in_channels) +
                                               " vs filters " + filters.shape_string());
  g.out_channels = filters.dim(0);
  g.kernel = filters.dim(2);
  g.stride = stride;
  g.out_length = window_output_length(g.length, g.kernel, stride);
  return g;
}

RowMatrix im2col(const Tensor& x, const ConvGeometry& g) {
  const auto width = static_cast<Eigen::Index>(g.in_channels * g.kernel);
  RowMatrix cols(static_cast<Eigen::Index>(g.batch * g.out_length), width);
  const double* src = x.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t t = 0; t < g.out_length; ++t) {
      double* row = cols.row(static_cast<Eigen::Index>(n * g.out_length + t)).data();
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        const double* in = src + (n * g.in_channels + c) * g.length + t * g.stride;
        std::copy(in, in + g.kernel, row + c * g.kernel);
      }
    }
  }
  return cols;
}

Tensor conv_forward_cols(const RowMatrix& cols, const Tensor& filters, const ConvGeometry& g,
                         const std::vector<std::size_t>& out_shape) {
  const ConstMatrixMap F(filters.data().data(), static_cast<Eigen::Index>(g.out_channels),
                         static_cast<Eigen::Index>(g.in_channels * g.kernel));
  const RowMatrix Y = cols * F.transpose();  // [N*L_out, C_out]
  Tensor y(out_shape);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      double* dst = y.data().data() + (n * g.out_channels + o) * g.out_length;
      for (std::size_t t = 0; t < g.out_length; ++t) {
        dst[t] = Y(static_cast<Eigen::Index>(n * g.out_length + t), static_cast<Eigen::Index>(o));
      }
    }
  }
  return y;
}

Conv1dGrads conv_backward_cols(const RowMatrix& cols, const Tensor& filters, const ConvGeometry& g,
                               const std::vector<std::size_t>& x_shape, const Tensor& dy) {
  require(dy.size() == g.batch * g.out_channels * g.out_length,
          "conv1d_backward: dy " + dy.shape_string());
  RowMatrix dY(static_cast<Eigen::Index>(g.batch * g.out_length), static_cast<Eigen::Index>(g.out_channels));
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const double* src = dy.data().data() + (n * g.out_channels + o) * g.out_length;
      for (std::size_t t = 0; t < g.out_length; ++t) {
        dY(static_cast<Eigen::Index>(n * g.out_length + t), static_cast<Eigen::Index>(o)) = src[t];
      }
    }
  }
  const ConstMatrixMap F(filters.data().data(), static_cast<Eigen::Index>(g.out_channels),
                         static_cast<Eigen::Index>(g.in_channels * g.kernel));
  Conv1dGrads grads{Tensor(x_shape), Tensor(filters.shape())};
  MatrixMap dF(grads.dfilters.data().data(), F.rows(), F.cols());
  dF.noalias() = dY.transpose() * cols;
  const RowMatrix dcols = dY * F;

  double* dx = grads.dx.data().data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t t = 0; t < g.out_length; ++t) {
      const double* row = dcols.row(static_cast<Eigen::Index>(n * g.out_length + t)).data();
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        double* out = dx + (n * g.in_channels + c) * g.length + t * g.stride;
        for (std::size_t k = 0; k < g.kernel; ++k) out[k] += row[c * g.kernel + k];
      }
    }
  }
  return grads;
}

}  // namespace detail

Tensor conv1d(const Tensor& x, const Tensor& filters, std::size_t stride) {
  const auto g = detail::conv_geometry(x, filters, stride);
  std::vector<std::size_t> out_shape = x.rank() == 2
                                           ? std::vector<std::size_t>{g.out_channels, g.out_length}
                                           : std::vector<std::size_t>{g.batch, g.out_channels, g.out_length};
  return detail::conv_forward_cols(detail::im2col(x, g), filters, g, out_shape);
}

Conv1dGrads conv1d_backward(const Tensor& x, const Tensor& filters, std::size_t stride,
                            const Tensor& dy) {
  const auto g = detail::conv_geometry(x, filters, stride);
  return detail::conv_backward_cols(detail::im2col(x, g), filters, g, x.shape(), dy);
}

PoolResult maxpool1d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  std::size_t batch = 0, channels = 0, length = 0;
  batched_shape(x, batch, channels, length);
  const std::size_t out_len = window_output_length(length, kernel, stride);
  std::vector<std::size_t> shape = x.rank() == 2 ? std::vector<std::size_t>{channels, out_len}
                                                 : std::vector<std::size_t>{batch, channels, out_len};
  PoolResult r{Tensor(shape), std::vector<std::size_t>(batch * channels * out_len)};
  std::size_t o = 0;
  for (std::size_t row = 0; row < batch * channels; ++row) {
    const std::size_t base = row * length;
    for (std::size_t t = 0; t < out_len; ++t, ++o) {
      std::size_t best = base + t * stride;
      for (std::size_t k = 1; k < kernel; ++k) {
        if (x[base + t * stride + k] > x[best]) best = base + t * stride + k;
      }
      r.y[o] = x[best];
      r.argmax[o] = best;
    }
  }
  return r;
}

Tensor maxpool1d_backward(const std::vector<std::size_t>& x_shape,
                          const std::vector<std::size_t>& argmax, const Tensor& dy) {
  require(argmax.size() == dy.size(), "maxpool1d_backward: dy does not match the forward pass");
  Tensor dx(x_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 2, "softmax expects [N,K]");
  Tensor p(logits.shape());
  const std::size_t k = logits.dim(1);
  for (std::size_t n = 0; n < logits.dim(0); ++n) {
    const double* z = logits.data().data() + n * k;
    double* out = p.data().data() + n * k;
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += (out[j] = std::exp(z[j] - m));
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
  }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(),
          "softmax_cross_entropy: logits " + logits.shape_string() + " vs " +
              std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  LossResult r{0.0, Tensor(logits.shape())};
  if (n == 0) return r;
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] < k, "label " + std::to_string(labels[i]) + " out of range");
    const double* z = logits.data().data() + i * k;
    double* g = r.dlogits.data().data() + i * k;
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - m);
    const double log_sum = std::log(sum) + m;
    r.loss += log_sum - z[labels[i]];
    for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(z[j] - log_sum) / static_cast<double>(n);
    g[labels[i]] -= 1.0 / static_cast<double>(n);
  }
  r.loss /= static_cast<double>(n);
  return r;
}

}  // namespace rscope::nnet

#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "../random.hpp"
#include "ops.hpp"
#include "tensor.hpp"

namespace rscope::nnet {

/// A differentiable stage. forward() caches whatever backward() needs, so a
/// layer instance serves one batch at a time.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  /// Forward pass without caching; safe on a shared, trained layer.
  virtual Tensor infer(const Tensor& x) const = 0;
  /// Returns dL/dx and stores parameter gradients (overwriting previous ones).
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual std::vector<Tensor*> parameters() { return {}; }
  virtual std::vector<Tensor*> gradients() { return {}; }

  /// Glorot-uniform weights, zero biases.
  virtual void initialize(Rng&) {}

  /// Per-sample output shape for a per-sample input shape.
  virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;

  virtual std::string descriptor() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, bool bias = true);

  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Tensor*> parameters() override;
  std::vector<Tensor*> gradients() override;
  void initialize(Rng& rng) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  std::size_t in_, out_;
  bool has_bias_;
  Tensor weight_, bias_, dweight_, dbias_;
  Tensor input_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override { return in; }
  std::string descriptor() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Tensor input_;
};

class Conv1D final : public Layer {
 public:
  Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride);

  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Tensor*> parameters() override { return {&filters_, &bias_}; }
  std::vector<Tensor*> gradients() override { return {&dfilters_, &dbias_}; }
  void initialize(Rng& rng) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1D>(*this); }

 private:
  std::size_t in_channels_, out_channels_, kernel_, stride_;
  Tensor filters_, bias_, dfilters_, dbias_;
  std::vector<std::size_t> input_shape_;
  detail::ConvGeometry geometry_{};
  RowMatrix cols_;
};

class MaxPool1D final : public Layer {
 public:
  MaxPool1D(std::size_t kernel, std::size_t stride) : kernel_(kernel), stride_(stride) {}

  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool1D>(*this); }

 private:
  std::size_t kernel_, stride_;
  std::vector<std::size_t> input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Reinterprets the per-sample part of a batch: [N, ...] -> [N, target...].
class Reshape final : public Layer {
 public:
  explicit Reshape(std::vector<std::size_t> target) : target_(std::move(target)) {}

  Tensor forward(const Tensor& x) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& dy) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string descriptor() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  std::vector<std::size_t> target_;
  std::vector<std::size_t> input_shape_;
};

/// Layer stack with a declared per-sample input shape.
class Network {
 public:
  explicit Network(std::vector<std::size_t> input_shape = {});
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Network& add(std::unique_ptr<Layer> layer);

  template <class L, class... Args>
  Network& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  void initialize(Seed seed);

  /// x is [N, input_shape...]. Returns logits [N, outputs].
  Tensor forward(const Tensor& x);
  Tensor infer(const Tensor& x) const;
  /// Backpropagates dL/dlogits through every layer.
  void backward(const Tensor& dlogits);

  /// Mean softmax cross-entropy of the batch; fills parameter gradients.
  double loss_and_gradients(const Tensor& x, std::span<const std::size_t> labels);
  double loss(const Tensor& x, std::span<const std::size_t> labels);

  std::vector<Tensor*> parameters();
  std::vector<Tensor*> gradients();
  std::size_t parameter_count() const;

  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  /// Per-sample shape after each layer, starting with the input shape.
  std::vector<std::vector<std::size_t>> shape_trace() const;
  std::size_t output_width() const;

  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

  /// "input 768;dense 768 512;relu;...", enough to rebuild the layer stack.
  std::string descriptor() const;
  static Network from_descriptor(std::string_view descriptor);

  /// Binary "RBNN1" model file: magic, u32 descriptor length, descriptor,
  /// u64 parameter count, then f32 parameters in declaration order.
  std::string serialize() const;
  static Network deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static Network load(const std::string& path);

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Max relative error between analytic parameter gradients and central finite
/// differences of the cross-entropy loss, |a - n| / max(|a|, |n|, 1e-8).
double grad_check(Network& net, const Tensor& input, std::span<const std::size_t> labels,
                  double step = 1e-4);

}  // namespace rscope::nnet

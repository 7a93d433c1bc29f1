#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "thermocad/nn/hyperparams.hpp"
#include "thermocad/nn/tensor.hpp"
#include "thermocad/random.hpp"

namespace thermocad::nn {

enum class Mode { Train, Eval };

/// A trainable tensor and its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool regularized = false;  // conv and dense kernels carry the L2 penalty
};

/// One stage of the network. forward() caches what backward() needs;
/// backward() adds parameter gradients and returns the input gradient.
/// Shapes passed around include the leading batch dimension.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Param<T>*> params() { return {}; }
  /// Non-trainable state that is still part of a checkpoint.
  virtual std::vector<Tensor<T>*> buffers() { return {}; }
};

/// Stride-1 convolution with zero "same" padding; for even kernels the
/// extra row and column of padding go at the bottom and right.
template <typename T>
class Conv2D final : public Layer<T> {
 public:
  Conv2D(int in_channels, int out_channels, int kernel);

  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2D>(*this); }
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int in_c_, out_c_, k_;
  Param<T> weight_;  // out x in x k x k
  Param<T> bias_;
  Tensor<T> input_;
};

/// Per-channel batch normalization over (batch, height, width).
template <typename T>
class BatchNorm2D final : public Layer<T> {
 public:
  explicit BatchNorm2D(int channels, double momentum = 0.9, double eps = 1e-5);

  std::string kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm2D>(*this); }
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  int channels_;
  double momentum_, eps_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  bool train_mode_ = true;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation kind) : kind_(kind) {}

  std::string kind() const override { return std::string(to_string(kind_)); }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ActivationLayer>(*this); }

 private:
  Activation kind_;
  Tensor<T> input_;
  Tensor<T> output_;
};

/// p x p max pooling, stride p, output size floor(H / p).
template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  explicit MaxPool2D(int pool) : p_(pool) {}

  std::string kind() const override { return "maxpool"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2D>(*this); }

 private:
  int p_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape input_shape_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  std::string kind() const override { return "gap"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  Shape input_shape_;
};

/// Fully connected layer, y = x W^T + b with W of shape out x in.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features);

  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  std::int64_t parameter_count() const { return static_cast<std::int64_t>(weight_.value.size() + bias_.value.size()); }

 private:
  int in_, out_;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
};

/// Inverted dropout: in Train mode zeroes inputs with probability `rate`
/// and scales survivors by 1 / (1 - rate); identity in Eval mode.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

 private:
  double rate_;
  Rng rng_;
  std::vector<T> mask_;
};

}  // namespace thermocad::nn

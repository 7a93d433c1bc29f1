#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "thermocad/nn/hyperparams.hpp"
#include "thermocad/nn/layers.hpp"
#include "thermocad/nn/tensor.hpp"

namespace thermocad::nn {

/// The block-structured classifier described by a HyperParams value.
///
/// Layer order: per block, convs_per_block x [conv, (batch-norm),
/// activation], then max pooling; flatten or global average pooling; two
/// x [dense(dense_units), activation, (dropout 0.25)]; dense(2). forward()
/// appends the softmax. Instantiated for float (training) and double
/// (gradient checking).
template <typename T>
class Model {
 public:
  Model(const HyperParams& hp, InputShape input, std::uint64_t seed);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  ~Model() = default;

  const HyperParams& hyperparams() const noexcept { return hp_; }
  InputShape input_shape() const noexcept { return input_; }

  /// Pre-softmax scores, B x 2.
  Tensor<T> logits(const Tensor<T>& x, Mode mode);
  /// Class probabilities, B x 2; rows sum to one.
  Tensor<T> forward(const Tensor<T>& x, Mode mode);

  struct LossResult {
    double loss = 0.0;        // cross-entropy + L2 penalty
    double cross_entropy = 0.0;
    double l2_penalty = 0.0;
    Tensor<T> probabilities;
  };

  /// Train-mode forward and full backward pass. Gradients are reset first.
  LossResult loss_and_grad(const Tensor<T>& x, std::span<const int> labels);
  /// Loss only, in the given mode; parameter gradients are untouched.
  LossResult loss(const Tensor<T>& x, std::span<const int> labels, Mode mode);

  void zero_grad();
  std::vector<Param<T>*> params();
  std::vector<Tensor<T>*> buffers();
  std::vector<const Layer<T>*> layers() const;
  std::int64_t parameter_count() const;
  double l2_penalty() const;

  /// Restarts every dropout mask stream from `seed`.
  void seed_dropout(std::uint64_t seed);

  /// Same architecture with parameters and buffers converted to U.
  template <typename U>
  Model<U> cast() const;

 private:
  template <typename>
  friend class Model;

  Model(const HyperParams& hp, InputShape input, std::uint64_t seed, bool initialize);

  void check_input(const Tensor<T>& x) const;
  Tensor<T> run(const Tensor<T>& x, Mode mode, bool check_finite);

  HyperParams hp_;
  InputShape input_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out(hp_, input_, 0, false);
  auto& self = const_cast<Model&>(*this);
  const auto src = self.params();
  const auto dst = out.params();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i]->value = src[i]->value.template cast<U>();
    dst[i]->grad = Tensor<U>(src[i]->value.shape());
  }
  const auto src_buf = self.buffers();
  const auto dst_buf = out.buffers();
  for (std::size_t i = 0; i < src_buf.size(); ++i) *dst_buf[i] = src_buf[i]->template cast<U>();
  return out;
}

/// Row-wise numerically stable softmax of a B x K tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean cross-entropy of softmax(logits) against labels; also writes the
/// gradient with respect to the logits when grad is non-null.
template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels, Tensor<T>* grad);

}  // namespace thermocad::nn

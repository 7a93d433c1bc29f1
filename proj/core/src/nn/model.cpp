#include "thermocad/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "thermocad/random.hpp"

namespace thermocad::nn {

namespace {

enum SeedTag : std::uint64_t { kInitTag = 11, kDropoutTag = 12 };

// Uniform limit sqrt(3 * gain^2 / fan_in): gain^2 = 2 for ReLU, 1.55 for ELU.
template <typename T>
void init_uniform(Tensor<T>& t, double limit, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-limit, limit));
}

double activation_gain2(Activation a) { return a == Activation::ELU ? 1.55 : 2.0; }

}  // namespace

template <typename T>
Model<T>::Model(const HyperParams& hp, InputShape input, std::uint64_t seed) : Model(hp, input, seed, true) {}

template <typename T>
Model<T>::Model(const HyperParams& hp, InputShape input, std::uint64_t seed, bool initialize) : hp_(hp), input_(input) {
  hp_.validate();
  if (input.channels < 1 || input.rows < 1 || input.cols < 1) raise(Errc::InvalidHyperParams, "bad input shape");

  // Walk the spatial size first so an impossible architecture fails before allocation.
  int rows = input.rows;
  int cols = input.cols;
  for (int b = 0; b < hp.n_blocks; ++b) {
    rows /= hp.pool;
    cols /= hp.pool;
    if (rows < 1 || cols < 1) {
      raise(Errc::SpatialCollapse, "pooling " + std::to_string(input.rows) + "x" + std::to_string(input.cols) +
                                       " by " + std::to_string(hp.pool) + " collapses at block " +
                                       std::to_string(b + 1));
    }
  }

  const double gain2 = activation_gain2(hp.activation);
  std::uint64_t layer_index = 0;
  auto rng_for = [&](std::uint64_t index) { return Rng(Rng::derive(seed, {kInitTag, index})); };

  int channels = input.channels;
  for (int b = 0; b < hp.n_blocks; ++b) {
    for (int c = 0; c < hp.convs_per_block; ++c) {
      auto conv = std::make_unique<Conv2D<T>>(channels, hp.filters, hp.kernel);
      if (initialize) {
        Rng rng = rng_for(layer_index);
        init_uniform(conv->weight().value, std::sqrt(3.0 * gain2 / (channels * hp.kernel * hp.kernel)), rng);
      }
      layers_.push_back(std::move(conv));
      ++layer_index;
      if (hp.batch_norm) layers_.push_back(std::make_unique<BatchNorm2D<T>>(hp.filters));
      layers_.push_back(std::make_unique<ActivationLayer<T>>(hp.activation));
      channels = hp.filters;
    }
    layers_.push_back(std::make_unique<MaxPool2D<T>>(hp.pool));
  }

  int features = channels;
  if (hp.top == TopLayer::Flatten) {
    layers_.push_back(std::make_unique<Flatten<T>>());
    features = channels * rows * cols;
  } else {
    layers_.push_back(std::make_unique<GlobalAvgPool<T>>());
  }

  std::uint64_t dropout_index = 0;
  for (int d = 0; d < 2; ++d) {
    auto dense = std::make_unique<Dense<T>>(features, hp.dense_units);
    if (initialize) {
      Rng rng = rng_for(layer_index);
      init_uniform(dense->weight().value, std::sqrt(3.0 * gain2 / features), rng);
    }
    layers_.push_back(std::move(dense));
    ++layer_index;
    layers_.push_back(std::make_unique<ActivationLayer<T>>(hp.activation));
    if (hp.dropout) {
      layers_.push_back(
          std::make_unique<Dropout<T>>(kDropoutRate, Rng::derive(seed, {kDropoutTag, dropout_index++})));
    }
    features = hp.dense_units;
  }

  auto head = std::make_unique<Dense<T>>(features, 2);
  if (initialize) {
    Rng rng = rng_for(layer_index);
    init_uniform(head->weight().value, std::sqrt(6.0 / (features + 2)), rng);
  }
  layers_.push_back(std::move(head));
}

template <typename T>
Model<T>::Model(const Model& other) : hp_(other.hp_), input_(other.input_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Model<T>& Model<T>::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Model<T>::check_input(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != static_cast<std::size_t>(input_.channels) ||
      x.dim(2) != static_cast<std::size_t>(input_.rows) || x.dim(3) != static_cast<std::size_t>(input_.cols)) {
    raise(Errc::ShapeMismatch, "model expects (B, " + std::to_string(input_.channels) + ", " +
                                   std::to_string(input_.rows) + ", " + std::to_string(input_.cols) + "), got " +
                                   shape_string(x.shape()));
  }
  if (x.dim(0) == 0) raise(Errc::ShapeMismatch, "empty batch");
}

template <typename T>
Tensor<T> Model<T>::run(const Tensor<T>& x, Mode mode, bool check_finite) {
  check_input(x);
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, mode);
    if (check_finite) {
      for (std::size_t j = 0; j < h.size(); ++j) {
        if (!std::isfinite(h[j])) {
          raise(Errc::NonFiniteLoss, "non-finite activation after layer " + std::to_string(i) + " (" +
                                         layers_[i]->kind() + ")");
        }
      }
    }
  }
  return h;
}

template <typename T>
Tensor<T> Model<T>::logits(const Tensor<T>& x, Mode mode) {
  return run(x, mode, false);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, Mode mode) {
  return softmax(run(x, mode, false));
}

template <typename T>
void Model<T>::zero_grad() {
  for (Param<T>* p : params()) p->grad.fill(T{0});
}

template <typename T>
std::vector<Param<T>*> Model<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_) {
    for (Param<T>* p : l->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>*> Model<T>::buffers() {
  std::vector<Tensor<T>*> out;
  for (auto& l : layers_) {
    for (Tensor<T>* b : l->buffers()) out.push_back(b);
  }
  return out;
}

template <typename T>
std::vector<const Layer<T>*> Model<T>::layers() const {
  std::vector<const Layer<T>*> out;
  for (const auto& l : layers_) out.push_back(l.get());
  return out;
}

template <typename T>
std::int64_t Model<T>::parameter_count() const {
  std::int64_t n = 0;
  for (Param<T>* p : const_cast<Model*>(this)->params()) n += static_cast<std::int64_t>(p->value.size());
  return n;
}

template <typename T>
double Model<T>::l2_penalty() const {
  if (hp_.l2 == 0.0) return 0.0;
  double sum = 0.0;
  for (Param<T>* p : const_cast<Model*>(this)->params()) {
    if (!p->regularized) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) sum += static_cast<double>(p->value[i]) * p->value[i];
  }
  return hp_.l2 * sum;
}

template <typename T>
void Model<T>::seed_dropout(std::uint64_t seed) {
  std::uint64_t index = 0;
  for (auto& l : layers_) {
    if (auto* d = dynamic_cast<Dropout<T>*>(l.get())) d->reseed(Rng::derive(seed, {kDropoutTag, index++}));
  }
}

template <typename T>
typename Model<T>::LossResult Model<T>::loss_and_grad(const Tensor<T>& x, std::span<const int> labels) {
  zero_grad();
  LossResult result;
  const Tensor<T> z = run(x, Mode::Train, true);
  Tensor<T> grad;
  result.cross_entropy = softmax_cross_entropy(z, labels, &grad);
  result.l2_penalty = l2_penalty();
  result.loss = result.cross_entropy + result.l2_penalty;
  if (!std::isfinite(result.loss)) raise(Errc::NonFiniteLoss, "loss is not finite");
  result.probabilities = softmax(z);

  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) grad = (*it)->backward(grad);
  if (hp_.l2 > 0.0) {
    const T scale = static_cast<T>(2.0 * hp_.l2);
    for (Param<T>* p : params()) {
      if (!p->regularized) continue;
      for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += scale * p->value[i];
    }
  }
  return result;
}

template <typename T>
typename Model<T>::LossResult Model<T>::loss(const Tensor<T>& x, std::span<const int> labels, Mode mode) {
  LossResult result;
  const Tensor<T> z = run(x, mode, false);
  result.cross_entropy = softmax_cross_entropy<T>(z, labels, nullptr);
  result.l2_penalty = l2_penalty();
  result.loss = result.cross_entropy + result.l2_penalty;
  result.probabilities = softmax(z);
  return result;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) raise(Errc::ShapeMismatch, "softmax expects B x K");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const T* z = logits.ptr() + b * K;
    const T m = *std::max_element(z, z + K);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(static_cast<double>(z[k] - m));
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] = static_cast<T>(std::exp(static_cast<double>(z[k] - m)) / sum);
  }
  return out;
}

template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels, Tensor<T>* grad) {
  if (logits.rank() != 2) raise(Errc::ShapeMismatch, "cross-entropy expects B x K logits");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) raise(Errc::ShapeMismatch, "label count does not match batch size");
  if (grad != nullptr) *grad = Tensor<T>(logits.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= K) raise(Errc::ShapeMismatch, "label out of range");
    const T* z = logits.ptr() + b * K;
    const double m = *std::max_element(z, z + K);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(z[k] - m);
    const double log_norm = m + std::log(sum);
    total += log_norm - z[y];
    if (grad != nullptr) {
      for (std::size_t k = 0; k < K; ++k) {
        const double p = std::exp(z[k] - log_norm);
        (*grad)[b * K + k] = static_cast<T>((p - (static_cast<int>(k) == y ? 1.0 : 0.0)) / B);
      }
    }
  }
  return total / static_cast<double>(B);
}

template class Model<float>;
template class Model<double>;
template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template double softmax_cross_entropy(const Tensor<float>&, std::span<const int>, Tensor<float>*);
template double softmax_cross_entropy(const Tensor<double>&, std::span<const int>, Tensor<double>*);

}  // namespace thermocad::nn

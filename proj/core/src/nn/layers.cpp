#include "thermocad/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thermocad::nn {

namespace {

void require_rank(const Tensor<auto>& x, std::size_t rank, const char* layer) {
  if (x.rank() != rank) {
    raise(Errc::ShapeMismatch, std::string(layer) + " expects a rank-" + std::to_string(rank) + " input, got " +
                                   shape_string(x.shape()));
  }
}

// Spatial positions per im2col tile; bounds the scratch matrix to
// (C * k * k) x kTilePositions regardless of image size.
constexpr std::size_t kTilePositions = 4096;

struct ConvGeometry {
  std::size_t channels, rows, cols, k;
  std::size_t pad_top, pad_left;
};

// Fills cols (C*k*k rows, (y1 - y0) * W columns) for image rows [y0, y1).
template <typename T>
void im2col_rows(const T* image, const ConvGeometry& g, std::size_t y0, std::size_t y1, std::vector<T>& cols) {
  const std::size_t width = (y1 - y0) * g.cols;
  cols.assign(g.channels * g.k * g.k * width, T{0});
  const long H = static_cast<long>(g.rows);
  const long W = static_cast<long>(g.cols);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = image + c * g.rows * g.cols;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        T* row = cols.data() + ((c * g.k + ki) * g.k + kj) * width;
        const long dx = static_cast<long>(kj) - static_cast<long>(g.pad_left);
        const long x_begin = std::max(0L, -dx);
        const long x_end = std::min(W, W - dx);
        for (std::size_t y = y0; y < y1; ++y) {
          const long sy = static_cast<long>(y) + static_cast<long>(ki) - static_cast<long>(g.pad_top);
          if (sy < 0 || sy >= H) continue;
          const T* src = plane + sy * W;
          T* dst = row + (y - y0) * g.cols;
          for (long x = x_begin; x < x_end; ++x) dst[x] = src[x + dx];
        }
      }
    }
  }
}

template <typename T>
void col2im_rows(const std::vector<T>& cols, const ConvGeometry& g, std::size_t y0, std::size_t y1, T* image) {
  const std::size_t width = (y1 - y0) * g.cols;
  const long H = static_cast<long>(g.rows);
  const long W = static_cast<long>(g.cols);
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.rows * g.cols;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const T* row = cols.data() + ((c * g.k + ki) * g.k + kj) * width;
        const long dx = static_cast<long>(kj) - static_cast<long>(g.pad_left);
        const long x_begin = std::max(0L, -dx);
        const long x_end = std::min(W, W - dx);
        for (std::size_t y = y0; y < y1; ++y) {
          const long sy = static_cast<long>(y) + static_cast<long>(ki) - static_cast<long>(g.pad_top);
          if (sy < 0 || sy >= H) continue;
          T* dst = plane + sy * W;
          const T* src = row + (y - y0) * g.cols;
          for (long x = x_begin; x < x_end; ++x) dst[x + dx] += src[x];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2D

template <typename T>
Conv2D<T>::Conv2D(int in_channels, int out_channels, int kernel) : in_c_(in_channels), out_c_(out_channels), k_(kernel) {
  const Shape wshape{static_cast<std::size_t>(out_c_), static_cast<std::size_t>(in_c_), static_cast<std::size_t>(k_),
                     static_cast<std::size_t>(k_)};
  weight_ = {"kernel", Tensor<T>(wshape), Tensor<T>(wshape), true};
  const Shape bshape{static_cast<std::size_t>(out_c_)};
  bias_ = {"bias", Tensor<T>(bshape), Tensor<T>(bshape), false};
}

template <typename T>
Shape Conv2D<T>::output_shape(const Shape& input) const {
  if (input.size() != 4 || input[1] != static_cast<std::size_t>(in_c_)) {
    raise(Errc::ShapeMismatch, "conv2d expects (B, " + std::to_string(in_c_) + ", H, W), got " + shape_string(input));
  }
  return {input[0], static_cast<std::size_t>(out_c_), input[2], input[3]};
}

template <typename T>
Tensor<T> Conv2D<T>::forward(const Tensor<T>& x, Mode) {
  require_rank(x, 4, "conv2d");
  Tensor<T> out(output_shape(x.shape()));
  input_ = x;
  const std::size_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
  const std::size_t HW = H * W;
  const std::size_t F = static_cast<std::size_t>(out_c_);
  const std::size_t K = static_cast<std::size_t>(in_c_ * k_ * k_);
  const ConvGeometry g{static_cast<std::size_t>(in_c_), H, W, static_cast<std::size_t>(k_),
                       static_cast<std::size_t>((k_ - 1) / 2), static_cast<std::size_t>((k_ - 1) / 2)};
  const std::size_t tile_rows = std::max<std::size_t>(1, kTilePositions / W);
  std::vector<T> cols;
  const T* wt = weight_.value.ptr();
  for (std::size_t b = 0; b < B; ++b) {
    const T* image = x.ptr() + b * g.channels * HW;
    T* dst = out.ptr() + b * F * HW;
    for (std::size_t f = 0; f < F; ++f) std::fill(dst + f * HW, dst + (f + 1) * HW, bias_.value[f]);
    for (std::size_t y0 = 0; y0 < H; y0 += tile_rows) {
      const std::size_t y1 = std::min(H, y0 + tile_rows);
      const std::size_t n = (y1 - y0) * W;
      im2col_rows(image, g, y0, y1, cols);
      for (std::size_t f = 0; f < F; ++f) {
        T* o = dst + f * HW + y0 * W;
        for (std::size_t j = 0; j < K; ++j) {
          const T w = wt[f * K + j];
          const T* c = cols.data() + j * n;
          for (std::size_t p = 0; p < n; ++p) o[p] += w * c[p];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> Conv2D<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T>& x = input_;
  const std::size_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
  const std::size_t HW = H * W;
  const std::size_t F = static_cast<std::size_t>(out_c_);
  const std::size_t K = static_cast<std::size_t>(in_c_ * k_ * k_);
  if (grad_out.shape() != output_shape(x.shape())) raise(Errc::ShapeMismatch, "conv2d gradient shape mismatch");
  const ConvGeometry g{static_cast<std::size_t>(in_c_), H, W, static_cast<std::size_t>(k_),
                       static_cast<std::size_t>((k_ - 1) / 2), static_cast<std::size_t>((k_ - 1) / 2)};
  const std::size_t tile_rows = std::max<std::size_t>(1, kTilePositions / W);

  Tensor<T> dx(x.shape());
  std::vector<T> cols;
  std::vector<T> dcols;
  const T* wt = weight_.value.ptr();
  T* dw = weight_.grad.ptr();
  for (std::size_t b = 0; b < B; ++b) {
    const T* image = x.ptr() + b * g.channels * HW;
    const T* dy = grad_out.ptr() + b * F * HW;
    for (std::size_t f = 0; f < F; ++f) {
      T acc{0};
      for (std::size_t p = 0; p < HW; ++p) acc += dy[f * HW + p];
      bias_.grad[f] += acc;
    }
    for (std::size_t y0 = 0; y0 < H; y0 += tile_rows) {
      const std::size_t y1 = std::min(H, y0 + tile_rows);
      const std::size_t n = (y1 - y0) * W;
      im2col_rows(image, g, y0, y1, cols);
      dcols.assign(K * n, T{0});
      for (std::size_t f = 0; f < F; ++f) {
        const T* d = dy + f * HW + y0 * W;
        for (std::size_t j = 0; j < K; ++j) {
          const T* c = cols.data() + j * n;
          T acc{0};
          for (std::size_t p = 0; p < n; ++p) acc += d[p] * c[p];
          dw[f * K + j] += acc;
          const T w = wt[f * K + j];
          T* dc = dcols.data() + j * n;
          for (std::size_t p = 0; p < n; ++p) dc[p] += w * d[p];
        }
      }
      col2im_rows(dcols, g, y0, y1, dx.ptr() + b * g.channels * HW);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2D

template <typename T>
BatchNorm2D<T>::BatchNorm2D(int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  const Shape shape{static_cast<std::size_t>(channels)};
  gamma_ = {"gamma", Tensor<T>(shape, T{1}), Tensor<T>(shape), false};
  beta_ = {"beta", Tensor<T>(shape), Tensor<T>(shape), false};
  running_mean_ = Tensor<T>(shape);
  running_var_ = Tensor<T>(shape, T{1});
}

template <typename T>
Tensor<T> BatchNorm2D<T>::forward(const Tensor<T>& x, Mode mode) {
  require_rank(x, 4, "batchnorm");
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (C != static_cast<std::size_t>(channels_)) raise(Errc::ShapeMismatch, "batchnorm channel mismatch");
  Tensor<T> out(x.shape());
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(C, T{0});
  const double n = static_cast<double>(B * HW);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = x.ptr() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) sum += p[i];
      }
      mean = sum / n;
      double sq = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = x.ptr() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / n;
      const double unbiased = n > 1 ? sq / (n - 1) : var;
      running_mean_[c] = static_cast<T>(momentum_ * running_mean_[c] + (1 - momentum_) * mean);
      running_var_[c] = static_cast<T>(momentum_ * running_var_[c] + (1 - momentum_) * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv;
    const T m = static_cast<T>(mean);
    const T g = gamma_.value[c];
    const T bt = beta_.value[c];
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        const T xh = (x[off + i] - m) * inv;
        xhat_[off + i] = xh;
        out[off + i] = g * xh + bt;
      }
    }
  }
  train_mode_ = mode == Mode::Train;
  return out;
}

template <typename T>
Tensor<T> BatchNorm2D<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != xhat_.shape()) raise(Errc::ShapeMismatch, "batchnorm gradient shape mismatch");
  const std::size_t B = grad_out.dim(0), C = grad_out.dim(1), HW = grad_out.dim(2) * grad_out.dim(3);
  const T n = static_cast<T>(B * HW);
  Tensor<T> dx(grad_out.shape());
  for (std::size_t c = 0; c < C; ++c) {
    T sum_dy{0}, sum_dy_xhat{0};
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * xhat_[off + i];
      }
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    const T scale = gamma_.value[c] * inv_std_[c];
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        dx[off + i] = train_mode_ ? scale / n * (n * grad_out[off + i] - sum_dy - xhat_[off + i] * sum_dy_xhat)
                                  : scale * grad_out[off + i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Tensor<T> ActivationLayer<T>::forward(const Tensor<T>& x, Mode) {
  input_ = x;
  Tensor<T> out(x.shape());
  if (kind_ == Activation::ReLU) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : std::expm1(x[i]);
  }
  output_ = out;
  return out;
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != input_.shape()) raise(Errc::ShapeMismatch, "activation gradient shape mismatch");
  Tensor<T> dx(grad_out.shape());
  if (kind_ == Activation::ReLU) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = input_[i] > T{0} ? grad_out[i] : T{0};
  } else {
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = input_[i] > T{0} ? grad_out[i] : grad_out[i] * (output_[i] + T{1});
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling, flatten

template <typename T>
Shape MaxPool2D<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) raise(Errc::ShapeMismatch, "maxpool expects a rank-4 input");
  const std::size_t p = static_cast<std::size_t>(p_);
  if (input[2] / p == 0 || input[3] / p == 0) {
    raise(Errc::SpatialCollapse, "pooling " + shape_string(input) + " by " + std::to_string(p_));
  }
  return {input[0], input[1], input[2] / p, input[3] / p};
}

template <typename T>
Tensor<T> MaxPool2D<T>::forward(const Tensor<T>& x, Mode) {
  const Shape oshape = output_shape(x.shape());
  input_shape_ = x.shape();
  Tensor<T> out(oshape);
  argmax_.assign(out.size(), 0);
  const std::size_t H = x.dim(2), W = x.dim(3), OH = oshape[2], OW = oshape[3];
  const std::size_t p = static_cast<std::size_t>(p_);
  const std::size_t planes = x.dim(0) * x.dim(1);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const std::size_t in_off = pl * H * W;
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        std::size_t best = in_off + (oy * p) * W + ox * p;
        for (std::size_t dy = 0; dy < p; ++dy) {
          for (std::size_t dx = 0; dx < p; ++dx) {
            const std::size_t idx = in_off + (oy * p + dy) * W + ox * p + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (pl * OH + oy) * OW + ox;
        out[o] = x[best];
        argmax_[o] = best;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> MaxPool2D<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != argmax_.size()) raise(Errc::ShapeMismatch, "maxpool gradient shape mismatch");
  Tensor<T> dx(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += grad_out[o];
  return dx;
}

template <typename T>
Shape Flatten<T>::output_shape(const Shape& input) const {
  if (input.empty()) raise(Errc::ShapeMismatch, "flatten needs a batch dimension");
  return {input[0], shape_size(input) / std::max<std::size_t>(1, input[0])};
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode) {
  input_shape_ = x.shape();
  Tensor<T> out = x;
  out.reshape(output_shape(x.shape()));
  return out;
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = grad_out;
  dx.reshape(input_shape_);
  return dx;
}

template <typename T>
Shape GlobalAvgPool<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) raise(Errc::ShapeMismatch, "global average pooling expects a rank-4 input");
  return {input[0], input[1]};
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode) {
  input_shape_ = x.shape();
  Tensor<T> out(output_shape(x.shape()));
  const std::size_t HW = x.dim(2) * x.dim(3);
  for (std::size_t pl = 0; pl < out.size(); ++pl) {
    T sum{0};
    const T* p = x.ptr() + pl * HW;
    for (std::size_t i = 0; i < HW; ++i) sum += p[i];
    out[pl] = sum / static_cast<T>(HW);
  }
  return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(input_shape_);
  const std::size_t HW = input_shape_[2] * input_shape_[3];
  for (std::size_t pl = 0; pl < grad_out.size(); ++pl) {
    const T g = grad_out[pl] / static_cast<T>(HW);
    std::fill(dx.ptr() + pl * HW, dx.ptr() + (pl + 1) * HW, g);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

template <typename T>
Dense<T>::Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {
  const Shape wshape{static_cast<std::size_t>(out_), static_cast<std::size_t>(in_)};
  weight_ = {"kernel", Tensor<T>(wshape), Tensor<T>(wshape), true};
  const Shape bshape{static_cast<std::size_t>(out_)};
  bias_ = {"bias", Tensor<T>(bshape), Tensor<T>(bshape), false};
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != static_cast<std::size_t>(in_)) {
    raise(Errc::ShapeMismatch, "dense expects (B, " + std::to_string(in_) + "), got " + shape_string(input));
  }
  return {input[0], static_cast<std::size_t>(out_)};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> out(output_shape(x.shape()));
  input_ = x;
  const std::size_t B = x.dim(0), I = static_cast<std::size_t>(in_), O = static_cast<std::size_t>(out_);
  for (std::size_t b = 0; b < B; ++b) {
    const T* xi = x.ptr() + b * I;
    for (std::size_t o = 0; o < O; ++o) {
      const T* w = weight_.value.ptr() + o * I;
      T acc{0};
      for (std::size_t i = 0; i < I; ++i) acc += xi[i] * w[i];
      out[b * O + o] = acc + bias_.value[o];
    }
  }
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T>& x = input_;
  const std::size_t B = x.dim(0), I = static_cast<std::size_t>(in_), O = static_cast<std::size_t>(out_);
  if (grad_out.shape() != Shape{B, O}) raise(Errc::ShapeMismatch, "dense gradient shape mismatch");
  Tensor<T> dx(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const T* xi = x.ptr() + b * I;
    T* dxi = dx.ptr() + b * I;
    for (std::size_t o = 0; o < O; ++o) {
      const T g = grad_out[b * O + o];
      if (g == T{0}) continue;
      bias_.grad[o] += g;
      T* dw = weight_.grad.ptr() + o * I;
      const T* w = weight_.value.ptr() + o * I;
      for (std::size_t i = 0; i < I; ++i) {
        dw[i] += g * xi[i];
        dxi[i] += g * w[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode) {
  if (mode == Mode::Eval || rate_ <= 0.0) {
    mask_.assign(x.size(), T{1});
    return x;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
  mask_.resize(x.size());
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng_.uniform() < rate_ ? T{0} : keep_scale;
    out[i] = x[i] * mask_[i];
  }
  return out;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != mask_.size()) raise(Errc::ShapeMismatch, "dropout gradient shape mismatch");
  Tensor<T> dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  return dx;
}

template class Conv2D<float>;
template class Conv2D<double>;
template class BatchNorm2D<float>;
template class BatchNorm2D<double>;
template class ActivationLayer<float>;
template class ActivationLayer<double>;
template class MaxPool2D<float>;
template class MaxPool2D<double>;
template class Flatten<float>;
template class Flatten<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class Dense<float>;
template class Dense<double>;
template class Dropout<float>;
template class Dropout<double>;

}  // namespace thermocad::nn

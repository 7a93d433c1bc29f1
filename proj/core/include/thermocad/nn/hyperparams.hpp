#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace thermocad::nn {

enum class OptimizerKind { Adam, SGD, RMSProp };
enum class Activation { ReLU, ELU };
enum class TopLayer { Flatten, GAP };

std::string_view to_string(OptimizerKind kind) noexcept;
std::string_view to_string(Activation kind) noexcept;
std::string_view to_string(TopLayer kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);
Activation parse_activation(std::string_view name);
TopLayer parse_top(std::string_view name);

/// Architecture and optimizer of one classifier. Blocks of
/// `convs_per_block` same-padded k x k convolutions followed by p x p max
/// pooling, a flatten or global-average-pooling top, two dense layers and
/// a two-way softmax head.
struct HyperParams {
  int n_blocks = 2;
  int convs_per_block = 2;
  int filters = 64;
  int kernel = 3;
  int pool = 2;
  int dense_units = 256;
  double l2 = 0.0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  bool dropout = false;
  bool batch_norm = false;
  Activation activation = Activation::ReLU;
  TopLayer top = TopLayer::GAP;

  /// Accepts manual configurations beyond the search space: any number of
  /// blocks the input can be pooled through, 1-5 convolutions per block,
  /// any positive filter and unit count.
  void validate() const;

  std::string to_json() const;
  static HyperParams from_json(std::string_view text);
  std::string describe() const;

  bool operator==(const HyperParams&) const = default;
};

inline constexpr double kDropoutRate = 0.25;

struct InputShape {
  int channels = 1;
  int rows = 250;
  int cols = 300;

  bool operator==(const InputShape&) const = default;
};

/// Exact trainable parameter total, including batch-norm scale and shift.
std::int64_t parameter_count(const HyperParams& hp, InputShape input);

}  // namespace thermocad::nn

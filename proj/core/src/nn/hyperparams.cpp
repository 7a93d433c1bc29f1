#include "thermocad/nn/hyperparams.hpp"

#include <sstream>

#include "../json_convert.hpp"
#include "thermocad/error.hpp"

namespace thermocad::nn {

std::string_view to_string(OptimizerKind kind) noexcept {
  switch (kind) {
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::RMSProp: return "rmsprop";
  }
  return "adam";
}

std::string_view to_string(Activation kind) noexcept { return kind == Activation::ELU ? "elu" : "relu"; }

std::string_view to_string(TopLayer kind) noexcept { return kind == TopLayer::Flatten ? "flatten" : "gap"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "rmsprop") return OptimizerKind::RMSProp;
  raise(Errc::InvalidHyperParams, "unknown optimizer '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "elu") return Activation::ELU;
  raise(Errc::InvalidHyperParams, "unknown activation '" + std::string(name) + "'");
}

TopLayer parse_top(std::string_view name) {
  if (name == "flatten") return TopLayer::Flatten;
  if (name == "gap") return TopLayer::GAP;
  raise(Errc::InvalidHyperParams, "unknown top layer '" + std::string(name) + "'");
}

void HyperParams::validate() const {
  auto fail = [](const std::string& msg) { raise(Errc::InvalidHyperParams, msg); };
  if (n_blocks < 1) fail("n_blocks must be >= 1");
  if (convs_per_block < 1 || convs_per_block > 5) fail("convs_per_block must lie in [1, 5]");
  if (filters < 1) fail("filters must be >= 1");
  if (kernel < 2 || kernel > 4) fail("kernel must be 2, 3 or 4");
  if (pool < 2 || pool > 3) fail("pool must be 2 or 3");
  if (dense_units < 1) fail("dense_units must be >= 1");
  if (!(l2 >= 0.0)) fail("l2 must be >= 0");
}

std::string HyperParams::to_json() const {
  nlohmann::json j = *this;
  return j.dump();
}

HyperParams HyperParams::from_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text).get<HyperParams>();
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::InvalidHyperParams, std::string("bad hyperparameter JSON: ") + e.what());
  }
}

std::string HyperParams::describe() const {
  std::ostringstream out;
  out << n_blocks << "x" << convs_per_block << " conv" << kernel << " f" << filters << " pool" << pool << " "
      << to_string(top) << " dense" << dense_units << " " << to_string(activation) << " " << to_string(optimizer)
      << " l2=" << l2 << (batch_norm ? " bn" : "") << (dropout ? " dropout" : "");
  return out.str();
}

std::int64_t parameter_count(const HyperParams& hp, InputShape input) {
  hp.validate();
  std::int64_t total = 0;
  std::int64_t channels = input.channels;
  int rows = input.rows;
  int cols = input.cols;
  const std::int64_t k2 = static_cast<std::int64_t>(hp.kernel) * hp.kernel;
  for (int b = 0; b < hp.n_blocks; ++b) {
    for (int c = 0; c < hp.convs_per_block; ++c) {
      total += k2 * channels * hp.filters + hp.filters;
      if (hp.batch_norm) total += 2 * hp.filters;
      channels = hp.filters;
    }
    rows /= hp.pool;
    cols /= hp.pool;
    if (rows < 1 || cols < 1) {
      raise(Errc::SpatialCollapse, "pooling collapses the feature map at block " + std::to_string(b + 1));
    }
  }
  const std::int64_t features =
      hp.top == TopLayer::Flatten ? channels * rows * cols : channels;
  const std::int64_t units = hp.dense_units;
  total += features * units + units;
  total += units * units + units;
  total += units * 2 + 2;
  return total;
}

}  // namespace thermocad::nn

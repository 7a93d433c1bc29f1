#pragma once

#include <filesystem>
#include <string>

#include "thermocad/nn/model.hpp"

namespace thermocad::nn {

/// Layout: "TCADW1\n", u32 little-endian header length, JSON header
/// (hyperparams, input_shape, tensors with shapes, byte_order, dtype),
/// then every parameter and buffer as little-endian float32 in model order.
void save_weights(Model<float>& model, const std::filesystem::path& path);
std::string serialize_weights(Model<float>& model);

/// Rebuilds the architecture recorded in the header.
Model<float> load_weights(const std::filesystem::path& path);
Model<float> deserialize_weights(const std::string& bytes);

/// Overwrites the weights of an existing model; the header must describe
/// the same hyperparameters and input shape.
void load_weights_into(Model<float>& model, const std::filesystem::path& path);

}  // namespace thermocad::nn

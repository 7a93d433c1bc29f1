#pragma once

// nlohmann::json conversions shared by the serializers. Private to core.

#include "json.hpp"
#include "thermocad/nn/hyperparams.hpp"

namespace thermocad::nn {

inline void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = nlohmann::json{{"n_blocks", hp.n_blocks},
                     {"convs_per_block", hp.convs_per_block},
                     {"filters", hp.filters},
                     {"kernel", hp.kernel},
                     {"pool", hp.pool},
                     {"dense_units", hp.dense_units},
                     {"l2", hp.l2},
                     {"optimizer", std::string(to_string(hp.optimizer))},
                     {"dropout", hp.dropout},
                     {"batch_norm", hp.batch_norm},
                     {"activation", std::string(to_string(hp.activation))},
                     {"top", std::string(to_string(hp.top))}};
}

inline void from_json(const nlohmann::json& j, HyperParams& hp) {
  hp.n_blocks = j.at("n_blocks").get<int>();
  hp.convs_per_block = j.at("convs_per_block").get<int>();
  hp.filters = j.at("filters").get<int>();
  hp.kernel = j.at("kernel").get<int>();
  hp.pool = j.at("pool").get<int>();
  hp.dense_units = j.at("dense_units").get<int>();
  hp.l2 = j.at("l2").get<double>();
  hp.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  hp.dropout = j.at("dropout").get<bool>();
  hp.batch_norm = j.at("batch_norm").get<bool>();
  hp.activation = parse_activation(j.at("activation").get<std::string>());
  hp.top = parse_top(j.at("top").get<std::string>());
}

inline void to_json(nlohmann::json& j, const InputShape& s) {
  j = nlohmann::json{{"channels", s.channels}, {"rows", s.rows}, {"cols", s.cols}};
}

inline void from_json(const nlohmann::json& j, InputShape& s) {
  s.channels = j.at("channels").get<int>();
  s.rows = j.at("rows").get<int>();
  s.cols = j.at("cols").get<int>();
}

}  // namespace thermocad::nn

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermocad/imgproc.hpp"
#include "thermocad/nn/hyperparams.hpp"
#include "thermocad/nn/trainer.hpp"
#include "thermocad/random.hpp"

namespace thermocad::hpo {

using nn::HyperParams;

inline constexpr std::size_t kDims = 12;
using Point = std::array<std::size_t, kDims>;  // one domain index per dimension

/// Discrete domains for every HyperParams field, in field order.
struct SearchSpace {
  std::vector<int> n_blocks{2, 3, 4};
  std::vector<int> convs_per_block{2, 3, 4, 5};
  std::vector<int> filters{64, 128, 256, 512};
  std::vector<int> kernel{2, 3, 4};
  std::vector<int> pool{2, 3};
  std::vector<int> dense_units{256, 512, 1024};
  std::vector<double> l2{0.0, 0.05, 0.10, 0.15, 0.20};
  std::vector<nn::OptimizerKind> optimizer{nn::OptimizerKind::Adam, nn::OptimizerKind::SGD,
                                           nn::OptimizerKind::RMSProp};
  std::vector<bool> dropout{true, false};
  std::vector<bool> batch_norm{true, false};
  std::vector<nn::Activation> activation{nn::Activation::ELU, nn::Activation::ReLU};
  std::vector<nn::TopLayer> top{nn::TopLayer::Flatten, nn::TopLayer::GAP};

  std::array<std::size_t, kDims> sizes() const;
  std::uint64_t cardinality() const;

  HyperParams at(const Point& p) const;
  /// Inverse of at(); nullopt when some field lies outside its domain.
  std::optional<Point> locate(const HyperParams& hp) const;
  bool contains(const HyperParams& hp) const { return locate(hp).has_value(); }

  /// Mixed-radix decoding of a flat index in [0, cardinality()).
  Point decode(std::uint64_t index) const;
  void enumerate(const std::function<void(const HyperParams&)>& visit) const;
};

enum class TrialStatus { Ok, Failed };

struct Trial {
  int trial_index = 0;
  HyperParams params;
  double objective = std::numeric_limits<double>::infinity();
  TrialStatus status = TrialStatus::Failed;
  double duration = 0.0;  // seconds
  std::string message;    // failure reason

  std::string to_json_line() const;
  static Trial from_json_line(std::string_view line);
};

struct TpeConfig {
  double gamma = 0.25;
  int n_startup_random = 10;
  int n_candidates = 24;
  double prior_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrialHistory {
  std::vector<Trial> trials;

  /// Lowest objective among Ok trials, first on ties; nullopt when none succeeded.
  std::optional<std::size_t> best_index() const;
  std::size_t ok_count() const;
};

using Objective = std::function<double(const HyperParams&)>;

HyperParams sample_uniform(const SearchSpace& space, Rng& rng);

/// Smoothed categorical density per dimension:
/// p(v) = (count(v) + prior / |domain|) / (n + prior).
std::vector<std::vector<double>> fit_density(const SearchSpace& space, std::span<const Point> points,
                                             double prior_weight);

/// Good set: the ceil(gamma * n) best Ok trials by objective (stable).
std::vector<std::size_t> good_indices(std::span<const Trial> history, double gamma);

HyperParams tpe_propose(std::span<const Trial> history, const SearchSpace& space, const TpeConfig& cfg, Rng& rng);

/// Runs trials until the history holds n_trials entries. Trial i draws from
/// an rng derived from (cfg.seed, i), so a run resumed from history_path
/// continues exactly as an uninterrupted one. Objective exceptions become
/// Failed trials.
TrialHistory run_tpe(const Objective& objective, const SearchSpace& space, int n_trials, const TpeConfig& cfg,
                     const std::optional<std::filesystem::path>& history_path = std::nullopt);

/// Same budget, uniform proposals only.
TrialHistory run_random(const Objective& objective, const SearchSpace& space, int n_trials, std::uint64_t seed);

TrialHistory load_history(const std::filesystem::path& path);

struct ObjectiveData {
  std::span<const imgproc::LabeledImage> train;
  std::span<const imgproc::LabeledImage> val;
  nn::TrainConfig train_cfg;
  imgproc::AugmentationConfig augmentation;
  std::uint64_t model_seed = 0;
};

/// Trains a model for each HyperParams and returns minus the validation F1.
/// Train and validation must hold disjoint patients.
Objective cnn_objective(ObjectiveData data);

}  // namespace thermocad::hpo

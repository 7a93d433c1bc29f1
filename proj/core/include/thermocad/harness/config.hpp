#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thermocad/hpo.hpp"
#include "thermocad/imgproc.hpp"
#include "thermocad/metrics.hpp"
#include "thermocad/nn/hyperparams.hpp"
#include "thermocad/nn/trainer.hpp"
#include "thermocad/splitter.hpp"
#include "thermocad/synthetic.hpp"

namespace thermocad::harness {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { Baseline, TpeSearch, SizeStudy };

std::string_view to_string(ExperimentKind kind) noexcept;

/// Where frames come from: a manifest on disk, or a synthetic cohort
/// rendered in memory at the given frame resolution.
struct CohortSource {
  std::filesystem::path manifest;
  std::optional<dataio::SyntheticCohortConfig> synthetic;
  int frame_rows = dataio::kFrameRows;
  int frame_cols = dataio::kFrameCols;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Baseline;
  int approach = 2;  // baseline only: 1 image-level, 2 patient-level
  CohortSource cohort;
  int input_rows = imgproc::kInputRows;
  int input_cols = imgproc::kInputCols;

  bool augment = true;
  imgproc::AugmentationConfig augmentation;
  nn::TrainConfig train;

  // Baseline: architectures to train; empty draws four from the search space.
  std::vector<nn::HyperParams> models;

  split::Ratios ratios;
  split::PatientSplitOptions patient_split;
  std::uint64_t split_seed = 0;

  hpo::TpeConfig tpe;
  int n_trials = 50;
  int top_k = 3;

  int n_folds = 4;
  std::vector<int> sizes{10, 20, 30, 40, 47};
  double size_val_fraction = 0.2;
  nn::HyperParams size_model;

  metrics::Aggregate aggregate = metrics::Aggregate::PerImage;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int threads = 1;
  // Baseline and TPE runs write best weights to output_dir/weights/<model_id>.tcadw.
  bool save_weights = false;
  std::filesystem::path output_dir = "runs";

  /// Checks ranges and the experiment-specific fields; ConfigError on failure.
  void validate() const;
};

/// Parses the versioned JSON config. Missing fields keep their defaults;
/// relative paths resolve against base_dir. Unknown experiments and the
/// state-of-the-art benchmark are rejected.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace thermocad::harness

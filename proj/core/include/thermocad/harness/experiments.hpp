#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermocad/harness/config.hpp"

namespace thermocad::harness {

/// Every frame of the cohort after ROI extraction, resizing and
/// normalization, keyed by patient in frame order.
struct PreparedCohort {
  split::Dataset dataset;
  std::map<std::string, std::vector<imgproc::ThermalImage>> frames;
  std::map<std::string, int> labels;

  std::vector<imgproc::LabeledImage> gather(std::span<const split::SampleRef> refs) const;
};

/// Loads the manifest (or renders the synthetic cohort) and preprocesses
/// every frame to cfg.input_rows x cfg.input_cols.
PreparedCohort prepare_cohort(const ExperimentConfig& cfg);

/// One trained and evaluated model.
struct RunRow {
  std::string model_id;
  split::Approach approach = split::Approach::PatientLevel;
  int fold = -1;  // size study only
  int size = 0;   // training patients, size study only
  bool augmented = false;
  std::uint64_t split_seed = 0;
  std::uint64_t model_seed = 0;
  nn::HyperParams hp;
  bool failed = false;
  std::string error;
  std::filesystem::path weights_path;  // empty unless weights were saved
  metrics::MetricsReport metrics;
  nn::TrainHistory history;
};

/// Fold-averaged metrics of one (size, augmentation) cell.
struct SizeCell {
  int size = 0;
  bool augmented = false;
  int runs = 0;  // successful runs averaged
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
};

struct RunReport {
  ExperimentKind experiment = ExperimentKind::Baseline;
  std::string config_json;
  std::vector<split::Split> splits;
  std::vector<RunRow> rows;
  std::optional<hpo::TrialHistory> trials;
  std::vector<SizeCell> size_cells;
  std::optional<std::size_t> best_row;  // highest F1, then sensitivity, among successful rows
};

/// Trains one architecture and scores it on the test images. Exceptions
/// become a failed row. A non-empty weights_path receives the
/// best-validation weights; cfg.train.checkpoint_path is ignored.
RunRow train_and_evaluate(const nn::HyperParams& hp, std::span<const imgproc::LabeledImage> train,
                          std::span<const imgproc::LabeledImage> val, std::span<const imgproc::LabeledImage> test,
                          const ExperimentConfig& cfg, bool augmented, std::uint64_t model_seed,
                          const std::filesystem::path& weights_path = {});

RunReport run_baseline(const ExperimentConfig& cfg, const PreparedCohort& cohort);
RunReport run_tpe_search(const ExperimentConfig& cfg, const PreparedCohort& cohort);
RunReport run_size_study(const ExperimentConfig& cfg, const PreparedCohort& cohort);

/// Dispatches on cfg.experiment after preparing the cohort.
RunReport run_experiment(const ExperimentConfig& cfg);

}  // namespace thermocad::harness

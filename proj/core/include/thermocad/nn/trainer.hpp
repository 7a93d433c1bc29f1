#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermocad/imgproc.hpp"
#include "thermocad/nn/model.hpp"

namespace thermocad::nn {

struct TrainConfig {
  int epochs = 40;
  int steps_per_epoch = 50;
  int batch_size = 32;
  std::optional<double> base_lr;  // unset: default for the optimizer
  double lr_decay = 0.95;
  int early_stop_patience = 10;
  std::string checkpoint_path;  // empty: keep the best weights in memory only
  std::uint64_t seed = 0;
  int eval_chunk = 64;

  void validate() const;
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int stopped_epoch = 0;  // 1-based; last epoch that ran
  int best_epoch = 0;     // 1-based argmin of validation loss
  bool early_stopped = false;
};

/// Tracks the best monitored value; improvement means strictly lower.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records one epoch (1-based). Returns true when training should stop.
  bool update(int epoch, double value);
  bool improved() const noexcept { return improved_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_value() const noexcept { return best_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  int since_best_ = 0;
  bool improved_ = false;
  double best_ = 0.0;
};

/// Learning rate in effect during the given 1-based epoch.
double scheduled_lr(double base_lr, double decay, int epoch);

struct TrainResult {
  Model<float> model;  // weights of the best validation epoch
  TrainHistory history;
};

/// Loss and accuracy of a model on a labelled set, Eval mode, processed in chunks.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> sick_probability;
};
Evaluation evaluate_set(Model<float>& model, std::span<const imgproc::LabeledImage> items, int chunk = 64);

/// Mini-batch training with per-epoch lr decay, best-validation checkpoint
/// and early stopping on validation loss. The optional callback observes
/// each finished epoch.
TrainResult train(Model<float> model, imgproc::BatchGenerator& batches,
                  std::span<const imgproc::LabeledImage> val_set, const TrainConfig& cfg,
                  const std::function<void(int, const EpochRecord&)>& on_epoch = {});

}  // namespace thermocad::nn

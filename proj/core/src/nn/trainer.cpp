#include "thermocad/nn/trainer.hpp"

#include <chrono>
#include <cmath>

#include "thermocad/nn/optimizer.hpp"
#include "thermocad/nn/weights_io.hpp"

namespace thermocad::nn {

void TrainConfig::validate() const {
  if (epochs < 1) raise(Errc::ConfigError, "epochs must be >= 1");
  if (steps_per_epoch < 1) raise(Errc::ConfigError, "steps_per_epoch must be >= 1");
  if (batch_size < 1) raise(Errc::ConfigError, "batch_size must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) raise(Errc::ConfigError, "lr_decay must lie in (0, 1]");
  if (early_stop_patience < 1) raise(Errc::ConfigError, "early_stop_patience must be >= 1");
  if (base_lr && !(*base_lr > 0.0)) raise(Errc::ConfigError, "base_lr must be positive");
  if (eval_chunk < 1) raise(Errc::ConfigError, "eval_chunk must be >= 1");
}

bool EarlyStopping::update(int epoch, double value) {
  improved_ = best_epoch_ == 0 || value < best_;
  if (improved_) {
    best_ = value;
    best_epoch_ = epoch;
    since_best_ = 0;
    return false;
  }
  return ++since_best_ >= patience_;
}

double scheduled_lr(double base_lr, double decay, int epoch) {
  return base_lr * std::pow(decay, static_cast<double>(epoch - 1));
}

Evaluation evaluate_set(Model<float>& model, std::span<const imgproc::LabeledImage> items, int chunk) {
  if (items.empty()) raise(Errc::EmptyDataset, "evaluation set is empty");
  Evaluation out;
  out.sick_probability.reserve(items.size());
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(chunk)) {
    const auto part = items.subspan(start, std::min<std::size_t>(chunk, items.size() - start));
    const Tensor<float> x = imgproc::stack_images(part);
    std::vector<int> labels;
    labels.reserve(part.size());
    for (const auto& item : part) labels.push_back(item.label);
    const auto result = model.loss(x, labels, Mode::Eval);
    loss_sum += result.cross_entropy * static_cast<double>(part.size());
    for (std::size_t i = 0; i < part.size(); ++i) {
      const double p1 = result.probabilities[i * 2 + 1];
      out.sick_probability.push_back(p1);
      if ((p1 >= 0.5 ? 1 : 0) == labels[i]) ++correct;
    }
  }
  out.loss = loss_sum / static_cast<double>(items.size()) + model.l2_penalty();
  out.accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
  return out;
}

TrainResult train(Model<float> model, imgproc::BatchGenerator& batches,
                  std::span<const imgproc::LabeledImage> val_set, const TrainConfig& cfg,
                  const std::function<void(int, const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (val_set.empty()) raise(Errc::EmptyDataset, "validation set is empty");

  const double base_lr = cfg.base_lr.value_or(default_learning_rate(model.hyperparams().optimizer));
  auto optimizer = make_optimizer<float>(model.hyperparams().optimizer);
  model.seed_dropout(cfg.seed);
  const auto params = model.params();

  TrainResult result{model, {}};
  EarlyStopping stopper(cfg.early_stop_patience);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.learning_rate = scheduled_lr(base_lr, cfg.lr_decay, epoch);

    double loss_sum = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const imgproc::Batch batch = batches.next();
      loss_sum += model.loss_and_grad(batch.images, batch.labels).loss;
      optimizer->step(params, rec.learning_rate);
    }
    rec.train_loss = loss_sum / cfg.steps_per_epoch;

    const Evaluation val = evaluate_set(model, val_set, cfg.eval_chunk);
    if (!std::isfinite(val.loss)) {
      raise(Errc::NonFiniteLoss, "validation loss is not finite at epoch " + std::to_string(epoch));
    }
    rec.val_loss = val.loss;
    rec.val_accuracy = val.accuracy;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);
    result.history.stopped_epoch = epoch;

    const bool stop = stopper.update(epoch, val.loss);
    if (stopper.improved()) {
      result.model = model;
      if (!cfg.checkpoint_path.empty()) save_weights(model, cfg.checkpoint_path);
    }
    if (on_epoch) on_epoch(epoch, rec);
    if (stop) {
      result.history.early_stopped = true;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace thermocad::nn

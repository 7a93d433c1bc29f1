#include <algorithm>
#include <cstring>

#include "thermocad/error.hpp"
#include "thermocad/imgproc.hpp"

namespace thermocad::imgproc {

AugmentationConfig AugmentationConfig::disabled(std::uint64_t seed) {
  AugmentationConfig cfg;
  cfg.horizontal_flip = false;
  cfg.vertical_flip = false;
  cfg.max_rotation_deg = 0.0;
  cfg.zoom_fraction = 0.0;
  cfg.noise_sigma = 0.0;
  cfg.seed = seed;
  return cfg;
}

bool AugmentationConfig::any_enabled() const {
  return horizontal_flip || vertical_flip || max_rotation_deg > 0.0 || zoom_fraction > 0.0 || noise_sigma > 0.0;
}

void AugmentationConfig::validate() const {
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 45.0)) {
    raise(Errc::OutOfRangeAngle, "max_rotation_deg must lie in [0, 45]");
  }
  if (!(zoom_fraction >= 0.0 && zoom_fraction < 1.0)) {
    raise(Errc::OutOfRangeFactor, "zoom_fraction must lie in [0, 1)");
  }
  if (!(noise_sigma >= 0.0)) raise(Errc::ConfigError, "noise_sigma must be >= 0");
}

ThermalImage augment(const ThermalImage& img, const AugmentationConfig& cfg, Rng& rng) {
  ThermalImage out = img;
  if (cfg.horizontal_flip && rng.bernoulli(0.5)) out = flip(out, FlipAxis::Horizontal);
  if (cfg.vertical_flip && rng.bernoulli(0.5)) out = flip(out, FlipAxis::Vertical);
  if (cfg.max_rotation_deg > 0.0 && rng.bernoulli(0.5)) {
    out = rotate(out, rng.uniform(0.0, cfg.max_rotation_deg));
  }
  if (cfg.zoom_fraction > 0.0 && rng.bernoulli(0.5)) {
    // zoom() caps at 2; zoom_fraction < 1 keeps the draw inside that.
    out = zoom(out, rng.uniform(1.0, 1.0 + cfg.zoom_fraction));
  }
  if (cfg.noise_sigma > 0.0 && rng.bernoulli(0.5)) out = add_gaussian_noise(out, cfg.noise_sigma, rng);
  return out;
}

BatchGenerator::BatchGenerator(std::span<const LabeledImage> dataset, int batch_size, int steps_per_epoch,
                               AugmentationConfig cfg)
    : dataset_(dataset), batch_size_(batch_size), steps_per_epoch_(steps_per_epoch), cfg_(cfg), rng_(cfg.seed) {
  if (dataset_.empty()) raise(Errc::EmptyDataset, "batch generator needs at least one image");
  if (batch_size < 1 || steps_per_epoch < 1) raise(Errc::ConfigError, "batch size and steps must be >= 1");
  cfg_.validate();
  rows_ = dataset_.front().image.rows;
  cols_ = dataset_.front().image.cols;
  for (const auto& item : dataset_) {
    if (item.image.rows != rows_ || item.image.cols != cols_) {
      raise(Errc::ShapeMismatch, "all dataset images must share one shape");
    }
    if (!item.image.normalized) raise(Errc::DegenerateInput, "dataset images must be normalized");
    if (item.label != 0 && item.label != 1) raise(Errc::ConfigError, "labels must be 0 or 1");
  }
}

Batch BatchGenerator::next() {
  Batch batch;
  const std::size_t plane = static_cast<std::size_t>(rows_) * cols_;
  batch.images = nn::Tensor<float>({static_cast<std::size_t>(batch_size_), 1, static_cast<std::size_t>(rows_),
                                    static_cast<std::size_t>(cols_)});
  batch.labels.reserve(static_cast<std::size_t>(batch_size_));
  batch.patient_ids.reserve(static_cast<std::size_t>(batch_size_));
  for (int b = 0; b < batch_size_; ++b) {
    const LabeledImage& item = dataset_[rng_.below(dataset_.size())];
    float* dst = batch.images.ptr() + static_cast<std::size_t>(b) * plane;
    if (cfg_.any_enabled()) {
      const ThermalImage img = augment(item.image, cfg_, rng_);
      std::copy(img.data.begin(), img.data.end(), dst);
    } else {
      std::copy(item.image.data.begin(), item.image.data.end(), dst);
    }
    batch.labels.push_back(item.label);
    batch.patient_ids.push_back(item.patient_id);
  }
  return batch;
}

nn::Tensor<float> stack_images(std::span<const LabeledImage> items) {
  if (items.empty()) return {};
  const int rows = items.front().image.rows;
  const int cols = items.front().image.cols;
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  nn::Tensor<float> out({items.size(), 1, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].image.rows != rows || items[i].image.cols != cols) {
      raise(Errc::ShapeMismatch, "all images must share one shape");
    }
    std::copy(items[i].image.data.begin(), items[i].image.data.end(), out.ptr() + i * plane);
  }
  return out;
}

}  // namespace thermocad::imgproc

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermocad/dataio.hpp"
#include "thermocad/nn/tensor.hpp"
#include "thermocad/random.hpp"

namespace thermocad::imgproc {

/// Canonical classifier input: 250 rows by 300 columns.
inline constexpr int kInputRows = 250;
inline constexpr int kInputCols = 300;

/// Single-channel floating point image. Temperatures in degC until
/// normalize_minmax sets `normalized`, after which values lie in [0, 1].
struct ThermalImage {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;
  bool normalized = false;

  ThermalImage() = default;
  ThermalImage(int r, int c, float fill = 0.0F, bool norm = false)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill), normalized(norm) {}
  ThermalImage(int r, int c, std::vector<float> values, bool norm = false);

  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  float min() const;
  float max() const;

  bool operator==(const ThermalImage&) const = default;
};

ThermalImage from_frame(const dataio::ThermalFrame& frame);

/// Tight bounding box of the mask support. Pixels inside the box but
/// outside the mask take the minimum in-mask temperature.
ThermalImage extract_roi(const dataio::ThermalFrame& frame, const dataio::Mask& mask);

/// Corner-aligned bilinear resampling. Input must be at least 2x2.
ThermalImage resize_bilinear(const ThermalImage& img, int out_rows = kInputRows, int out_cols = kInputCols);

/// (x - min) / (max - min); a constant image maps to all zeros.
ThermalImage normalize_minmax(const ThermalImage& img);

enum class FlipAxis {
  Horizontal,  // mirror columns
  Vertical,    // mirror rows
};

ThermalImage flip(const ThermalImage& img, FlipAxis axis);

/// Counter-clockwise rotation about the image center by degrees in [0, 45],
/// bilinear resampling; samples falling outside the source take `fill`
/// (the image minimum when not given).
ThermalImage rotate(const ThermalImage& img, double degrees, std::optional<float> fill = std::nullopt);

/// Centered crop of rows x cols (offsets floor((H - rows) / 2)).
ThermalImage center_crop(const ThermalImage& img, int rows, int cols);

/// Zoom-in by factor in [1, 2]: central crop of round(H / f) x round(W / f)
/// resized back to H x W.
ThermalImage zoom(const ThermalImage& img, double factor);

/// clamp(x + N(0, sigma^2), 0, 1) on a normalized image.
ThermalImage add_gaussian_noise(const ThermalImage& img, double sigma, Rng& rng);

/// ROI extraction, bilinear resize and min-max normalization.
ThermalImage preprocess(const dataio::ThermalFrame& frame, const dataio::Mask& mask, int out_rows = kInputRows,
                        int out_cols = kInputCols);

// ---------------------------------------------------------------------------
// Augmentation and mini-batches

struct AugmentationConfig {
  bool horizontal_flip = true;
  bool vertical_flip = true;
  double max_rotation_deg = 45.0;
  double zoom_fraction = 0.20;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;

  /// Every transform switched off: batches are plain resamples.
  static AugmentationConfig disabled(std::uint64_t seed = 0);
  bool any_enabled() const;
  void validate() const;
};

/// Applies each enabled transform with probability 0.5 in the order
/// horizontal flip, vertical flip, rotation, zoom, noise.
ThermalImage augment(const ThermalImage& img, const AugmentationConfig& cfg, Rng& rng);

struct LabeledImage {
  ThermalImage image;
  int label = 0;  // 0 healthy, 1 sick
  std::string patient_id;
};

struct Batch {
  nn::Tensor<float> images;  // B x 1 x H x W
  std::vector<int> labels;
  std::vector<std::string> patient_ids;
};

/// Endless stream of augmented mini-batches drawn uniformly with
/// replacement. The dataset is borrowed and must outlive the generator.
class BatchGenerator {
 public:
  BatchGenerator(std::span<const LabeledImage> dataset, int batch_size, int steps_per_epoch,
                 AugmentationConfig cfg);

  Batch next();

  int batch_size() const noexcept { return batch_size_; }
  int steps_per_epoch() const noexcept { return steps_per_epoch_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

 private:
  std::span<const LabeledImage> dataset_;
  int batch_size_;
  int steps_per_epoch_;
  AugmentationConfig cfg_;
  Rng rng_;
  int rows_ = 0;
  int cols_ = 0;
};

/// Stacks images into a B x 1 x H x W tensor without augmentation.
nn::Tensor<float> stack_images(std::span<const LabeledImage> items);

}  // namespace thermocad::imgproc

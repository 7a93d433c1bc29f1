#include "thermocad/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "thermocad/error.hpp"

namespace thermocad::imgproc {

ThermalImage::ThermalImage(int r, int c, std::vector<float> values, bool norm)
    : rows(r), cols(c), data(std::move(values)), normalized(norm) {
  if (data.size() != static_cast<std::size_t>(r) * c) raise(Errc::ShapeMismatch, "image data does not match shape");
}

float ThermalImage::min() const { return data.empty() ? 0.0F : *std::min_element(data.begin(), data.end()); }
float ThermalImage::max() const { return data.empty() ? 0.0F : *std::max_element(data.begin(), data.end()); }

ThermalImage from_frame(const dataio::ThermalFrame& frame) {
  return ThermalImage(frame.rows, frame.cols, frame.data);
}

ThermalImage extract_roi(const dataio::ThermalFrame& frame, const dataio::Mask& mask) {
  if (mask.rows != frame.rows || mask.cols != frame.cols) {
    raise(Errc::ShapeMismatch, "mask and frame dimensions differ");
  }
  int top = frame.rows, bottom = -1, left = frame.cols, right = -1;
  float fill = std::numeric_limits<float>::infinity();
  for (int r = 0; r < frame.rows; ++r) {
    for (int c = 0; c < frame.cols; ++c) {
      if (!mask.at(r, c)) continue;
      top = std::min(top, r);
      bottom = std::max(bottom, r);
      left = std::min(left, c);
      right = std::max(right, c);
      fill = std::min(fill, frame.at(r, c));
    }
  }
  if (bottom < 0) raise(Errc::EmptyMask, "mask has no set pixels");

  ThermalImage out(bottom - top + 1, right - left + 1);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      const int fr = top + r;
      const int fc = left + c;
      out.at(r, c) = mask.at(fr, fc) ? frame.at(fr, fc) : fill;
    }
  }
  return out;
}

namespace {

// Bilinear sample at a source coordinate already known to be in range.
// The result is clamped to the four neighbours so rounding never escapes
// their hull.
float sample_bilinear(const ThermalImage& img, double sy, double sx) {
  int y0 = static_cast<int>(std::floor(sy));
  int x0 = static_cast<int>(std::floor(sx));
  y0 = std::clamp(y0, 0, img.rows - 1);
  x0 = std::clamp(x0, 0, img.cols - 1);
  const int y1 = std::min(y0 + 1, img.rows - 1);
  const int x1 = std::min(x0 + 1, img.cols - 1);
  const double fy = std::clamp(sy - y0, 0.0, 1.0);
  const double fx = std::clamp(sx - x0, 0.0, 1.0);
  const double a = img.at(y0, x0), b = img.at(y0, x1);
  const double c = img.at(y1, x0), d = img.at(y1, x1);
  const double top = a + fx * (b - a);
  const double bot = c + fx * (d - c);
  const double v = top + fy * (bot - top);
  const double lo = std::min({a, b, c, d});
  const double hi = std::max({a, b, c, d});
  return static_cast<float>(std::clamp(v, lo, hi));
}

}  // namespace

ThermalImage resize_bilinear(const ThermalImage& img, int out_rows, int out_cols) {
  if (img.rows < 2 || img.cols < 2) raise(Errc::DegenerateInput, "resize needs an input of at least 2x2");
  if (out_rows < 1 || out_cols < 1) raise(Errc::DegenerateInput, "resize target must be at least 1x1");
  const double sy = out_rows > 1 ? static_cast<double>(img.rows - 1) / (out_rows - 1) : 0.0;
  const double sx = out_cols > 1 ? static_cast<double>(img.cols - 1) / (out_cols - 1) : 0.0;
  ThermalImage out(out_rows, out_cols, 0.0F, img.normalized);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) out.at(r, c) = sample_bilinear(img, r * sy, c * sx);
  }
  return out;
}

ThermalImage normalize_minmax(const ThermalImage& img) {
  ThermalImage out(img.rows, img.cols, 0.0F, true);
  if (img.data.empty()) return out;
  const double lo = img.min();
  const double hi = img.max();
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      out.data[i] = static_cast<float>((img.data[i] - lo) / range);
    }
  }
  return out;
}

ThermalImage flip(const ThermalImage& img, FlipAxis axis) {
  ThermalImage out(img.rows, img.cols, 0.0F, img.normalized);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      out.at(r, c) = axis == FlipAxis::Horizontal ? img.at(r, img.cols - 1 - c) : img.at(img.rows - 1 - r, c);
    }
  }
  return out;
}

ThermalImage rotate(const ThermalImage& img, double degrees, std::optional<float> fill) {
  if (!(degrees >= 0.0 && degrees <= 45.0)) {
    raise(Errc::OutOfRangeAngle, "rotation must lie in [0, 45] degrees, got " + std::to_string(degrees));
  }
  if (degrees == 0.0 || img.data.empty()) return img;

  const float background = fill.value_or(img.min());
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cy = (img.rows - 1) / 2.0;
  const double cx = (img.cols - 1) / 2.0;
  constexpr double kEdge = 1e-9;

  ThermalImage out(img.rows, img.cols, background, img.normalized);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const double dy = r - cy;
      const double dx = c - cx;
      // Inverse map: source position of the destination pixel.
      const double sx = cx + cs * dx - sn * dy;
      const double sy = cy + sn * dx + cs * dy;
      if (sx < -kEdge || sy < -kEdge || sx > img.cols - 1 + kEdge || sy > img.rows - 1 + kEdge) continue;
      out.at(r, c) = sample_bilinear(img, std::clamp(sy, 0.0, img.rows - 1.0), std::clamp(sx, 0.0, img.cols - 1.0));
    }
  }
  return out;
}

ThermalImage center_crop(const ThermalImage& img, int rows, int cols) {
  if (rows < 1 || cols < 1 || rows > img.rows || cols > img.cols) {
    raise(Errc::DegenerateInput, "crop size must lie within the image");
  }
  const int top = (img.rows - rows) / 2;
  const int left = (img.cols - cols) / 2;
  ThermalImage out(rows, cols, 0.0F, img.normalized);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.at(r, c) = img.at(top + r, left + c);
  }
  return out;
}

ThermalImage zoom(const ThermalImage& img, double factor) {
  if (!(factor >= 1.0 && factor <= 2.0)) {
    raise(Errc::OutOfRangeFactor, "zoom factor must lie in [1, 2], got " + std::to_string(factor));
  }
  if (factor == 1.0) return img;
  const int rows = std::max(2, static_cast<int>(std::lround(img.rows / factor)));
  const int cols = std::max(2, static_cast<int>(std::lround(img.cols / factor)));
  return resize_bilinear(center_crop(img, std::min(rows, img.rows), std::min(cols, img.cols)), img.rows, img.cols);
}

ThermalImage add_gaussian_noise(const ThermalImage& img, double sigma, Rng& rng) {
  if (!img.normalized) raise(Errc::DegenerateInput, "noise is defined on normalized images only");
  if (!(sigma >= 0.0)) raise(Errc::DegenerateInput, "noise sigma must be >= 0");
  if (sigma == 0.0) return img;
  ThermalImage out = img;
  for (float& v : out.data) v = static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0));
  return out;
}

ThermalImage preprocess(const dataio::ThermalFrame& frame, const dataio::Mask& mask, int out_rows, int out_cols) {
  return normalize_minmax(resize_bilinear(extract_roi(frame, mask), out_rows, out_cols));
}

}  // namespace thermocad::imgproc

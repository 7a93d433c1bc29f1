#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace thermocad::dataio {

/// Camera export geometry: 480 rows of 640 temperature samples.
inline constexpr int kFrameRows = 480;
inline constexpr int kFrameCols = 640;
inline constexpr std::size_t kFrameSize = static_cast<std::size_t>(kFrameRows) * kFrameCols;

/// Measurement range of the camera in degrees Celsius.
inline constexpr float kMinCameraTemp = -40.0F;
inline constexpr float kMaxCameraTemp = 500.0F;

enum class Label : int { Healthy = 0, Sick = 1 };
enum class Laterality { Left, Right, Both };
enum class CohortSource { Real, Synthetic };

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Laterality laterality) noexcept;
std::string_view to_string(CohortSource source) noexcept;

/// One temperature matrix, row-major, first row at the top of the image.
/// Frames read from disk are always kFrameRows x kFrameCols; reduced
/// resolution frames only come out of the in-memory synthetic renderer.
struct ThermalFrame {
  std::string patient_id;
  int frame_index = 0;
  int rows = kFrameRows;
  int cols = kFrameCols;
  std::vector<float> data;

  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Binary region-of-interest mask (values 0 or 1).
struct Mask {
  std::string patient_id;
  int rows = kFrameRows;
  int cols = kFrameCols;
  std::vector<std::uint8_t> data;
  Laterality laterality = Laterality::Both;

  std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t count() const;
};

struct PatientRecord {
  std::string patient_id;
  Label label = Label::Healthy;
  std::vector<std::filesystem::path> frame_paths;
  std::optional<std::filesystem::path> mask_path;
  std::optional<Laterality> laterality;
};

struct Cohort {
  std::vector<PatientRecord> patients;
  CohortSource source = CohortSource::Real;
  std::optional<std::int64_t> seed;

  std::size_t total_frames() const;
  std::size_t count(Label label) const;
};

enum class RangePolicy {
  Warn,    // keep the value, append a warning
  Reject,  // raise OutOfRange
};

struct MatrixLoadOptions {
  RangePolicy range = RangePolicy::Warn;
  std::vector<std::string>* warnings = nullptr;
};

/// Parses a whitespace separated temperature matrix of exactly
/// kFrameRows * kFrameCols finite decimal values.
ThermalFrame load_thermal_matrix(const std::filesystem::path& path,
                                 const MatrixLoadOptions& options = {},
                                 std::string patient_id = {}, int frame_index = 0);

/// Same as load_thermal_matrix but over an in-memory text buffer.
ThermalFrame parse_thermal_matrix(std::string_view text, const MatrixLoadOptions& options = {});

/// Writes one row per line with six significant digits.
void write_thermal_matrix(const std::filesystem::path& path, const ThermalFrame& frame);

/// Rounds to the six significant digit decimal the text writer emits.
float quantize_temperature(float value);

/// Reads a P2 or P5 graymap of kFrameCols x kFrameRows; pixels > 127 are set.
/// Laterality is inferred from the mask geometry.
Mask load_mask(const std::filesystem::path& path, std::string patient_id = {});
Mask parse_mask(std::string_view bytes, std::string patient_id = {});

/// Writes a binary (P5) graymap with set pixels at 255.
void write_mask(const std::filesystem::path& path, const Mask& mask);

/// Laterality from mask geometry: Both when each half of the image holds
/// more than 10% of the set pixels, otherwise the side of the centroid.
Laterality infer_laterality(const Mask& mask);

/// Reads a cohort manifest. Relative paths are resolved against the
/// manifest's directory. With validate, every referenced file must exist.
Cohort load_manifest(const std::filesystem::path& path, bool validate = true);
Cohort parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir,
                      bool validate = true);

/// Writes a manifest; paths under base_dir are stored relative to it.
void save_manifest(const Cohort& cohort, const std::filesystem::path& path);

struct ValidationReport {
  struct PatientSummary {
    std::string patient_id;
    Label label = Label::Healthy;
    std::size_t frames = 0;
    bool has_mask = false;
  };

  std::vector<PatientSummary> patients;
  std::size_t n_healthy = 0;
  std::size_t n_sick = 0;
  std::size_t total_frames = 0;
  std::size_t expected_frames_per_patient = 0;
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
};

ValidationReport validate_cohort(const Cohort& cohort);

}  // namespace thermocad::dataio

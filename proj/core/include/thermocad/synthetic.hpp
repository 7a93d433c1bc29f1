#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "thermocad/dataio.hpp"

namespace thermocad::dataio {

struct SyntheticCohortConfig {
  int n_healthy = 19;
  int n_sick = 38;
  int frames_per_patient = 20;
  double hotspot_amplitude = 1.5;           // degC
  double hotspot_sigma = 30.0;              // pixels at 640 columns
  double patient_confound_amplitude = 0.5;  // degC
  double noise_sigma = 0.05;                // degC
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fixed per-patient quantities of the synthetic field.
struct SyntheticPatient {
  std::string patient_id;
  int index = 0;
  Label label = Label::Healthy;
  struct Wave {
    double fx, fy, phase, weight;
  };
  std::vector<Wave> texture;
  double hotspot_u = 0.0;  // column coordinate in [0, 1)
  double hotspot_v = 0.0;  // row coordinate in [0, 1)
};

/// Patient i is healthy for i < n_healthy, sick otherwise.
SyntheticPatient synthetic_patient(const SyntheticCohortConfig& cfg, int index);

/// Renders one frame of a synthetic patient at the given resolution. The
/// field is defined in normalized image coordinates so reduced resolutions
/// sample the same scene; values are quantized to six significant digits.
ThermalFrame render_synthetic_frame(const SyntheticCohortConfig& cfg, const SyntheticPatient& patient,
                                    int frame_index, int rows = kFrameRows, int cols = kFrameCols);

/// Union of two elliptical breast regions, laterality Both.
Mask render_synthetic_mask(const std::string& patient_id, int rows = kFrameRows, int cols = kFrameCols);

/// One patient's frames and mask held in memory.
struct SyntheticPatientData {
  std::string patient_id;
  Label label = Label::Healthy;
  std::vector<ThermalFrame> frames;
  Mask mask;
};

/// In-memory cohort at reduced resolution for desk-scale experiments.
std::vector<SyntheticPatientData> synthesize_cohort(const SyntheticCohortConfig& cfg, int rows, int cols);

/// Writes frames/<id>_<nn>.txt, masks/<id>.pgm and manifest.json under
/// out_dir at full camera resolution and returns the resulting cohort.
Cohort generate_synthetic_cohort(const SyntheticCohortConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace thermocad::dataio

#include "thermocad/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "thermocad/error.hpp"
#include "thermocad/random.hpp"

namespace thermocad::dataio {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kTextureWaves = 4;

// Breast geometry in normalized coordinates, mirrored about u = 0.5.
constexpr double kBreastOffsetU = 0.20;
constexpr double kBreastCenterV = 0.62;
constexpr double kBreastRadiusU = 0.16;
constexpr double kBreastRadiusV = 0.25;

enum SeedTag : std::uint64_t { kPatientTag = 1, kFrameTag = 2 };

double base_field(double u, double v) {
  const double du = std::abs(u - 0.5) - kBreastOffsetU;
  const double dv = v - kBreastCenterV;
  const double bump = std::exp(-(du * du / (2 * 0.10 * 0.10) + dv * dv / (2 * 0.14 * 0.14)));
  return 32.0 + 1.2 * (bump - 0.3) - 0.8 * (v - 0.5);
}

std::string patient_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%03d", index + 1);
  return buf;
}

}  // namespace

void SyntheticCohortConfig::validate() const {
  if (n_healthy < 1 || n_sick < 1 || frames_per_patient < 1) {
    raise(Errc::ConfigError, "synthetic cohort counts must be >= 1");
  }
  if (hotspot_amplitude < 0 || patient_confound_amplitude < 0 || noise_sigma < 0) {
    raise(Errc::ConfigError, "synthetic amplitudes must be >= 0");
  }
  if (!(hotspot_sigma > 0)) raise(Errc::ConfigError, "hotspot_sigma must be > 0");
}

SyntheticPatient synthetic_patient(const SyntheticCohortConfig& cfg, int index) {
  SyntheticPatient p;
  p.patient_id = patient_name(index);
  p.index = index;
  p.label = index < cfg.n_healthy ? Label::Healthy : Label::Sick;

  Rng rng(Rng::derive(cfg.seed, {kPatientTag, static_cast<std::uint64_t>(index)}));
  for (int k = 0; k < kTextureWaves; ++k) {
    const double freq = rng.uniform(1.5, 4.0);
    const double angle = rng.uniform(0.0, kPi);
    p.texture.push_back({freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2 * kPi),
                         1.0 / kTextureWaves});
  }
  const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
  p.hotspot_u = 0.5 + side * (kBreastOffsetU + rng.uniform(-0.06, 0.06));
  p.hotspot_v = kBreastCenterV + rng.uniform(-0.10, 0.10);
  return p;
}

ThermalFrame render_synthetic_frame(const SyntheticCohortConfig& cfg, const SyntheticPatient& patient,
                                    int frame_index, int rows, int cols) {
  ThermalFrame frame;
  frame.patient_id = patient.patient_id;
  frame.frame_index = frame_index;
  frame.rows = rows;
  frame.cols = cols;
  frame.data.resize(static_cast<std::size_t>(rows) * cols);

  // Hot spot width is specified in camera pixels; pixels are square.
  const double sigma_u = cfg.hotspot_sigma / kFrameCols;
  const double sigma_v = cfg.hotspot_sigma / kFrameRows;
  const bool sick = patient.label == Label::Sick;

  Rng noise(Rng::derive(cfg.seed, {kFrameTag, static_cast<std::uint64_t>(patient.index),
                                   static_cast<std::uint64_t>(frame_index)}));
  for (int r = 0; r < rows; ++r) {
    const double v = (r + 0.5) / rows;
    for (int c = 0; c < cols; ++c) {
      const double u = (c + 0.5) / cols;
      double t = base_field(u, v);
      double tex = 0.0;
      for (const auto& w : patient.texture) tex += w.weight * std::cos(2 * kPi * (w.fx * u + w.fy * v) + w.phase);
      t += cfg.patient_confound_amplitude * tex;
      if (sick) {
        const double du = (u - patient.hotspot_u) / sigma_u;
        const double dv = (v - patient.hotspot_v) / sigma_v;
        t += cfg.hotspot_amplitude * std::exp(-0.5 * (du * du + dv * dv));
      }
      if (cfg.noise_sigma > 0) t += noise.normal(0.0, cfg.noise_sigma);
      frame.data[static_cast<std::size_t>(r) * cols + c] = quantize_temperature(static_cast<float>(t));
    }
  }
  return frame;
}

Mask render_synthetic_mask(const std::string& patient_id, int rows, int cols) {
  Mask mask;
  mask.patient_id = patient_id;
  mask.rows = rows;
  mask.cols = cols;
  mask.data.assign(static_cast<std::size_t>(rows) * cols, 0);
  for (int r = 0; r < rows; ++r) {
    const double v = (r + 0.5) / rows;
    for (int c = 0; c < cols; ++c) {
      const double u = (c + 0.5) / cols;
      const double du = (std::abs(u - 0.5) - kBreastOffsetU) / kBreastRadiusU;
      const double dv = (v - kBreastCenterV) / kBreastRadiusV;
      if (du * du + dv * dv <= 1.0) mask.data[static_cast<std::size_t>(r) * cols + c] = 1;
    }
  }
  mask.laterality = Laterality::Both;
  return mask;
}

std::vector<SyntheticPatientData> synthesize_cohort(const SyntheticCohortConfig& cfg, int rows, int cols) {
  cfg.validate();
  std::vector<SyntheticPatientData> out;
  const int n = cfg.n_healthy + cfg.n_sick;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const SyntheticPatient patient = synthetic_patient(cfg, i);
    SyntheticPatientData data;
    data.patient_id = patient.patient_id;
    data.label = patient.label;
    data.mask = render_synthetic_mask(patient.patient_id, rows, cols);
    for (int f = 0; f < cfg.frames_per_patient; ++f) {
      data.frames.push_back(render_synthetic_frame(cfg, patient, f, rows, cols));
    }
    out.push_back(std::move(data));
  }
  return out;
}

Cohort generate_synthetic_cohort(const SyntheticCohortConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  if (!ec) fs::create_directories(out_dir / "masks", ec);
  if (ec) raise(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  Cohort cohort;
  cohort.source = CohortSource::Synthetic;
  cohort.seed = static_cast<std::int64_t>(cfg.seed);
  const int n = cfg.n_healthy + cfg.n_sick;
  for (int i = 0; i < n; ++i) {
    const SyntheticPatient patient = synthetic_patient(cfg, i);
    PatientRecord rec;
    rec.patient_id = patient.patient_id;
    rec.label = patient.label;
    rec.laterality = Laterality::Both;

    const fs::path mask_path = out_dir / "masks" / (patient.patient_id + ".pgm");
    write_mask(mask_path, render_synthetic_mask(patient.patient_id));
    rec.mask_path = mask_path;

    for (int f = 0; f < cfg.frames_per_patient; ++f) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%02d.txt", patient.patient_id.c_str(), f);
      const fs::path frame_path = out_dir / "frames" / name;
      write_thermal_matrix(frame_path, render_synthetic_frame(cfg, patient, f));
      rec.frame_paths.push_back(frame_path);
    }
    cohort.patients.push_back(std::move(rec));
  }
  save_manifest(cohort, out_dir / "manifest.json");
  return cohort;
}

}  // namespace thermocad::dataio

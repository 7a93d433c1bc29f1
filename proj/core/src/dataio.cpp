#include "thermocad/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "thermocad/error.hpp"

namespace thermocad::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Label label) noexcept {
  return label == Label::Sick ? "sick" : "healthy";
}

std::string_view to_string(Laterality laterality) noexcept {
  switch (laterality) {
    case Laterality::Left: return "left";
    case Laterality::Right: return "right";
    case Laterality::Both: return "both";
  }
  return "both";
}

std::string_view to_string(CohortSource source) noexcept {
  return source == CohortSource::Synthetic ? "synthetic" : "real";
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

std::size_t Cohort::total_frames() const {
  std::size_t n = 0;
  for (const auto& p : patients) n += p.frame_paths.size();
  return n;
}

std::size_t Cohort::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(patients.begin(), patients.end(), [&](const PatientRecord& p) { return p.label == label; }));
}

namespace {

std::string read_file(const fs::path& path, Errc missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(missing, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\v'; }

}  // namespace

ThermalFrame parse_thermal_matrix(std::string_view text, const MatrixLoadOptions& options) {
  ThermalFrame frame;
  frame.data.reserve(kFrameSize);
  std::size_t out_of_range = 0;
  const char* p = text.data();
  const char* end = p + text.size();
  while (true) {
    while (p != end && is_space(*p)) ++p;
    if (p == end) break;
    const char* token_end = p;
    while (token_end != end && !is_space(*token_end)) ++token_end;
    if (frame.data.size() == kFrameSize) {
      raise(Errc::MalformedMatrix, "more than " + std::to_string(kFrameSize) + " values");
    }
    // from_chars rejects a leading '+', which some exporters emit.
    const char* num = (*p == '+') ? p + 1 : p;
    float value = 0.0F;
    auto [ptr, ec] = std::from_chars(num, token_end, value);
    if (ec != std::errc() || ptr != token_end) {
      raise(Errc::MalformedMatrix, "non-numeric token '" + std::string(p, token_end) + "' at index " +
                                       std::to_string(frame.data.size()));
    }
    if (!std::isfinite(value)) {
      raise(Errc::MalformedMatrix, "non-finite value at index " + std::to_string(frame.data.size()));
    }
    if (value < kMinCameraTemp || value > kMaxCameraTemp) {
      if (options.range == RangePolicy::Reject) {
        raise(Errc::OutOfRange, "value " + std::string(p, token_end) + " outside camera range at index " +
                                    std::to_string(frame.data.size()));
      }
      ++out_of_range;
    }
    frame.data.push_back(value);
    p = token_end;
  }
  if (frame.data.size() != kFrameSize) {
    raise(Errc::MalformedMatrix,
          "expected " + std::to_string(kFrameSize) + " values, found " + std::to_string(frame.data.size()));
  }
  if (out_of_range > 0 && options.warnings != nullptr) {
    options.warnings->push_back(std::to_string(out_of_range) + " value(s) outside camera range [-40, 500]");
  }
  return frame;
}

ThermalFrame load_thermal_matrix(const fs::path& path, const MatrixLoadOptions& options, std::string patient_id,
                                 int frame_index) {
  const std::string text = read_file(path, Errc::MissingFile);
  ThermalFrame frame;
  try {
    frame = parse_thermal_matrix(text, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  frame.patient_id = std::move(patient_id);
  frame.frame_index = frame_index;
  return frame;
}

namespace {

std::size_t format_temperature(char* buf, std::size_t size, float value) {
  auto [ptr, ec] = std::to_chars(buf, buf + size, value, std::chars_format::general, 6);
  if (ec != std::errc()) raise(Errc::IoError, "temperature formatting failed");
  return static_cast<std::size_t>(ptr - buf);
}

}  // namespace

float quantize_temperature(float value) {
  char buf[32];
  const std::size_t n = format_temperature(buf, sizeof buf, value);
  float out = 0.0F;
  std::from_chars(buf, buf + n, out);
  return out;
}

void write_thermal_matrix(const fs::path& path, const ThermalFrame& frame) {
  if (frame.data.size() != static_cast<std::size_t>(frame.rows) * frame.cols) {
    raise(Errc::MalformedMatrix, "frame data does not match its shape");
  }
  std::string out;
  out.reserve(frame.data.size() * 8);
  char buf[32];
  for (int r = 0; r < frame.rows; ++r) {
    for (int c = 0; c < frame.cols; ++c) {
      if (c != 0) out.push_back(' ');
      out.append(buf, format_temperature(buf, sizeof buf, frame.at(r, c)));
    }
    out.push_back('\n');
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) raise(Errc::IoError, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) raise(Errc::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PGM masks

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (is_space(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int() {
    skip_space_and_comments();
    long value = 0;
    auto [ptr, ec] = std::from_chars(bytes_.data() + pos_, bytes_.data() + bytes_.size(), value);
    if (ec != std::errc()) raise(Errc::MalformedMask, "expected integer in graymap header");
    pos_ = static_cast<std::size_t>(ptr - bytes_.data());
    return value;
  }

  std::string_view magic() {
    if (bytes_.size() < 2) raise(Errc::MalformedMask, "file too short");
    pos_ = 2;
    return bytes_.substr(0, 2);
  }

  // Exactly one whitespace byte separates the header from P5 raster data.
  std::string_view raster() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) raise(Errc::MalformedMask, "missing raster separator");
    return bytes_.substr(pos_ + 1);
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Mask parse_mask(std::string_view bytes, std::string patient_id) {
  PgmReader reader(bytes);
  const std::string_view magic = reader.magic();
  if (magic != "P2" && magic != "P5") raise(Errc::MalformedMask, "unsupported magic '" + std::string(magic) + "'");
  const long width = reader.read_int();
  const long height = reader.read_int();
  const long maxval = reader.read_int();
  if (width != kFrameCols || height != kFrameRows) {
    raise(Errc::MalformedMask, "expected 640x480 graymap, got " + std::to_string(width) + "x" +
                                   std::to_string(height));
  }
  if (maxval < 1 || maxval > 255) raise(Errc::MalformedMask, "maxval must be in [1, 255]");

  Mask mask;
  mask.patient_id = std::move(patient_id);
  mask.data.resize(kFrameSize);
  if (magic == "P5") {
    const std::string_view raster = reader.raster();
    if (raster.size() < kFrameSize) raise(Errc::MalformedMask, "truncated P5 raster");
    for (std::size_t i = 0; i < kFrameSize; ++i) {
      mask.data[i] = static_cast<unsigned char>(raster[i]) > 127 ? 1 : 0;
    }
  } else {
    for (std::size_t i = 0; i < kFrameSize; ++i) {
      const long v = reader.read_int();
      if (v < 0 || v > maxval) raise(Errc::MalformedMask, "pixel value out of range");
      mask.data[i] = v > 127 ? 1 : 0;
    }
  }
  if (mask.count() == 0) raise(Errc::EmptyMask, "mask has no set pixels");
  mask.laterality = infer_laterality(mask);
  return mask;
}

Mask load_mask(const fs::path& path, std::string patient_id) {
  const std::string bytes = read_file(path, Errc::MissingFile);
  try {
    return parse_mask(bytes, std::move(patient_id));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_mask(const fs::path& path, const Mask& mask) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) raise(Errc::IoError, "cannot write " + path.string());
  file << "P5\n" << mask.cols << ' ' << mask.rows << "\n255\n";
  std::string raster(mask.data.size(), '\0');
  for (std::size_t i = 0; i < mask.data.size(); ++i) raster[i] = mask.data[i] ? static_cast<char>(255) : '\0';
  file.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!file) raise(Errc::IoError, "write failed for " + path.string());
}

Laterality infer_laterality(const Mask& mask) {
  const int split = mask.cols / 2;
  std::size_t left = 0;
  std::size_t right = 0;
  double col_sum = 0.0;
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      if (!mask.at(r, c)) continue;
      (c < split ? left : right) += 1;
      col_sum += c;
    }
  }
  const std::size_t total = left + right;
  if (total == 0) raise(Errc::EmptyMask, "mask has no set pixels");
  if (left * 10 > total && right * 10 > total) return Laterality::Both;
  return col_sum / static_cast<double>(total) < split ? Laterality::Left : Laterality::Right;
}

// ---------------------------------------------------------------------------
// Manifests

namespace {

Label parse_label(const json& j) {
  if (!j.is_string()) raise(Errc::SchemaError, "label must be a string");
  const auto s = j.get<std::string>();
  if (s == "healthy") return Label::Healthy;
  if (s == "sick") return Label::Sick;
  raise(Errc::SchemaError, "unknown label '" + s + "'");
}

std::optional<Laterality> parse_laterality(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_string()) raise(Errc::SchemaError, "laterality must be a string or null");
  const auto s = j.get<std::string>();
  if (s == "left") return Laterality::Left;
  if (s == "right") return Laterality::Right;
  if (s == "both") return Laterality::Both;
  raise(Errc::SchemaError, "unknown laterality '" + s + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

Cohort parse_manifest(std::string_view json_text, const fs::path& base_dir, bool validate) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(Errc::SchemaError, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("patients") || !doc["patients"].is_array()) {
    raise(Errc::SchemaError, "manifest requires a 'patients' array");
  }
  if (doc["patients"].empty()) raise(Errc::SchemaError, "'patients' is empty");

  Cohort cohort;
  if (doc.contains("source") && !doc["source"].is_null()) {
    const auto s = doc["source"].get<std::string>();
    if (s == "real") {
      cohort.source = CohortSource::Real;
    } else if (s == "synthetic") {
      cohort.source = CohortSource::Synthetic;
    } else {
      raise(Errc::SchemaError, "unknown source '" + s + "'");
    }
  }
  if (doc.contains("seed") && !doc["seed"].is_null()) {
    if (!doc["seed"].is_number_integer()) raise(Errc::SchemaError, "seed must be an integer");
    cohort.seed = doc["seed"].get<std::int64_t>();
  }

  std::set<std::string> seen;
  for (const json& entry : doc["patients"]) {
    if (!entry.is_object()) raise(Errc::SchemaError, "patient entry must be an object");
    if (!entry.contains("id") || !entry["id"].is_string()) raise(Errc::SchemaError, "patient 'id' missing");
    if (!entry.contains("label")) raise(Errc::SchemaError, "patient 'label' missing");
    if (!entry.contains("frames") || !entry["frames"].is_array()) raise(Errc::SchemaError, "patient 'frames' missing");

    PatientRecord rec;
    rec.patient_id = entry["id"].get<std::string>();
    if (!seen.insert(rec.patient_id).second) raise(Errc::DuplicatePatient, "duplicate patient id " + rec.patient_id);
    rec.label = parse_label(entry["label"]);
    for (const json& f : entry["frames"]) {
      if (!f.is_string()) raise(Errc::SchemaError, "frame path must be a string");
      rec.frame_paths.push_back(resolve(base_dir, f.get<std::string>()));
    }
    if (rec.frame_paths.empty()) raise(Errc::SchemaError, "patient " + rec.patient_id + " has no frames");
    if (entry.contains("mask") && !entry["mask"].is_null()) {
      if (!entry["mask"].is_string()) raise(Errc::SchemaError, "mask must be a string or null");
      rec.mask_path = resolve(base_dir, entry["mask"].get<std::string>());
    }
    if (entry.contains("laterality")) rec.laterality = parse_laterality(entry["laterality"]);

    if (validate) {
      for (const auto& p : rec.frame_paths) {
        if (!fs::exists(p)) raise(Errc::MissingFile, p.string());
      }
      if (rec.mask_path && !fs::exists(*rec.mask_path)) raise(Errc::MissingFile, rec.mask_path->string());
    }
    cohort.patients.push_back(std::move(rec));
  }
  return cohort;
}

Cohort load_manifest(const fs::path& path, bool validate) {
  const std::string text = read_file(path, Errc::MissingFile);
  return parse_manifest(text, path.parent_path(), validate);
}

void save_manifest(const Cohort& cohort, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = p.lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? p.generic_string() : r.generic_string();
  };
  json doc;
  doc["source"] = std::string(to_string(cohort.source));
  doc["seed"] = cohort.seed ? json(*cohort.seed) : json(nullptr);
  json patients = json::array();
  for (const auto& rec : cohort.patients) {
    json entry;
    entry["id"] = rec.patient_id;
    entry["label"] = std::string(to_string(rec.label));
    json frames = json::array();
    for (const auto& f : rec.frame_paths) frames.push_back(rel(f));
    entry["frames"] = std::move(frames);
    entry["mask"] = rec.mask_path ? json(rel(*rec.mask_path)) : json(nullptr);
    entry["laterality"] = rec.laterality ? json(std::string(to_string(*rec.laterality))) : json(nullptr);
    patients.push_back(std::move(entry));
  }
  doc["patients"] = std::move(patients);

  std::ofstream file(path, std::ios::trunc);
  if (!file) raise(Errc::IoError, "cannot write " + path.string());
  file << doc.dump(2) << '\n';
  if (!file) raise(Errc::IoError, "write failed for " + path.string());
}

ValidationReport validate_cohort(const Cohort& cohort) {
  ValidationReport report;
  std::map<std::size_t, std::size_t> count_histogram;
  std::set<std::string> seen;
  for (const auto& rec : cohort.patients) {
    report.patients.push_back({rec.patient_id, rec.label, rec.frame_paths.size(), rec.mask_path.has_value()});
    (rec.label == Label::Sick ? report.n_sick : report.n_healthy) += 1;
    report.total_frames += rec.frame_paths.size();
    count_histogram[rec.frame_paths.size()] += 1;
    if (!seen.insert(rec.patient_id).second) report.issues.push_back("duplicate patient id " + rec.patient_id);
  }
  if (cohort.patients.empty()) {
    report.issues.push_back("empty cohort");
    return report;
  }

  // The modal sequence length is taken as the cohort convention; ties go to the longer one.
  std::size_t best_count = 0;
  for (const auto& [frames, n] : count_histogram) {
    if (n >= best_count) {
      best_count = n;
      report.expected_frames_per_patient = frames;
    }
  }
  for (const auto& s : report.patients) {
    if (s.frames == 0) {
      report.issues.push_back("patient " + s.patient_id + " has no frames");
    } else if (s.frames != report.expected_frames_per_patient) {
      report.issues.push_back("patient " + s.patient_id + " has " + std::to_string(s.frames) + " frames, expected " +
                              std::to_string(report.expected_frames_per_patient));
    }
    if (!s.has_mask) report.issues.push_back("patient " + s.patient_id + " has no mask");
  }
  if (report.n_healthy == 0 || report.n_sick == 0) {
    report.issues.push_back("single-class cohort: only " +
                            std::string(report.n_sick == 0 ? "healthy" : "sick") + " patients");
  }
  return report;
}

}  // namespace thermocad::dataio

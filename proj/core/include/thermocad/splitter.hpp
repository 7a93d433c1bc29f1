#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermocad/dataio.hpp"

namespace thermocad::split {

/// One frame of one patient.
struct SampleRef {
  std::string patient_id;
  int frame_index = 0;

  auto operator<=>(const SampleRef&) const = default;
};

/// What the splitters need to know about a patient.
struct PatientEntry {
  std::string patient_id;
  dataio::Label label = dataio::Label::Healthy;
  int frames = 0;
};

using Dataset = std::vector<PatientEntry>;

Dataset describe(const dataio::Cohort& cohort);

enum class Approach {
  ImageLevel,    // frames pooled across patients before splitting
  PatientLevel,  // whole patients assigned to one part
};

std::string_view to_string(Approach approach) noexcept;

struct Split {
  std::vector<SampleRef> train;
  std::vector<SampleRef> val;
  std::vector<SampleRef> test;
  Approach approach = Approach::PatientLevel;
  std::uint64_t seed = 0;

  bool operator==(const Split&) const = default;
};

struct Ratios {
  double train = 0.5;
  double val = 0.2;
  double test = 0.3;
};

/// Pools frames, shuffles each label class with the seed and cuts it by
/// the ratios using largest-remainder rounding.
Split split_image_level(const Dataset& dataset, Ratios ratios, std::uint64_t seed);

/// Where patients beyond train_patients + test_patients go.
enum class LeftoverPolicy { Validation, Train };

struct PatientSplitOptions {
  int train_patients = 39;
  int test_patients = 17;
  double val_fraction_of_train = 0.2;
  LeftoverPolicy leftover = LeftoverPolicy::Validation;
};

/// Label-stratified assignment of whole patients. Validation patients are
/// carved out of the train patients.
Split split_patient_level(const Dataset& dataset, const PatientSplitOptions& options, std::uint64_t seed);

struct SizeStudyFold {
  int fold_index = 0;
  std::vector<std::string> test_patients;
  std::map<int, std::vector<std::string>> train_subsets;  // size -> patient ids, nested
};

/// Per fold: a fresh 5 healthy + 5 sick test set and nested, label
/// balanced training subsets drawn from the remaining patients.
std::vector<SizeStudyFold> make_size_study_folds(const Dataset& dataset, int n_folds = 4,
                                                 std::vector<int> sizes = {10, 20, 30, 40, 47},
                                                 std::uint64_t seed = 0);

struct PatientPartition {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Whole-patient, label-stratified validation carve-out of round(fraction * n).
PatientPartition carve_validation(const Dataset& dataset, std::span<const std::string> patients,
                                  double val_fraction, std::uint64_t seed);

/// Every frame of the listed patients, in listed order.
std::vector<SampleRef> frames_of(const Dataset& dataset, std::span<const std::string> patients);

struct LeakageReport {
  std::vector<std::string> leaked_patients;  // sorted
  std::size_t total_patients = 0;
  std::size_t total_samples = 0;

  std::size_t leaked() const noexcept { return leaked_patients.size(); }
};

/// Patients whose frames appear in more than one part.
LeakageReport verify_split(const Split& split);

std::string split_to_json(const Split& split);
Split split_from_json(std::string_view text);

}  // namespace thermocad::split

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "test_util.hpp"
#include "thermocad/splitter.hpp"

using namespace thermocad;
using namespace thermocad::split;
using dataio::Label;
using thermocad::testing::code_of;

namespace {

// Healthy patients first, as in the synthetic cohorts.
Dataset cohort(int healthy, int sick, int frames = 20) {
  Dataset d;
  for (int i = 0; i < healthy + sick; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "P%03d", i + 1);
    d.push_back({id, i < healthy ? Label::Healthy : Label::Sick, frames});
  }
  return d;
}

std::set<std::string> patients_of(const std::vector<SampleRef>& refs) {
  std::set<std::string> out;
  for (const auto& r : refs) out.insert(r.patient_id);
  return out;
}

std::map<std::string, Label> labels_of(const Dataset& d) {
  std::map<std::string, Label> out;
  for (const auto& p : d) out[p.patient_id] = p.label;
  return out;
}

void expect_partition(const Dataset& d, const Split& s) {
  std::set<SampleRef> seen;
  std::size_t total = 0;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (const auto& r : *part) {
      EXPECT_TRUE(seen.insert(r).second) << r.patient_id << "/" << r.frame_index;
      ++total;
    }
  }
  std::size_t expected = 0;
  for (const auto& p : d) expected += static_cast<std::size_t>(p.frames);
  EXPECT_EQ(total, expected);
}

}  // namespace

TEST(ImageLevel, FiftyTwentyThirtyOn1140Images) {
  const Split s = split_image_level(cohort(19, 38), {}, 1);
  EXPECT_EQ(s.train.size(), 570U);
  EXPECT_EQ(s.val.size(), 228U);
  EXPECT_EQ(s.test.size(), 342U);
  EXPECT_EQ(s.approach, Approach::ImageLevel);
  expect_partition(cohort(19, 38), s);
}

TEST(ImageLevel, AllTrainRatio) {
  const Split s = split_image_level(cohort(3, 3, 4), {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(s.train.size(), 24U);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(ImageLevel, Deterministic) {
  EXPECT_EQ(split_image_level(cohort(5, 7), {}, 9), split_image_level(cohort(5, 7), {}, 9));
  EXPECT_NE(split_image_level(cohort(5, 7), {}, 9), split_image_level(cohort(5, 7), {}, 10));
}

TEST(ImageLevel, RatioAndSizeErrors) {
  EXPECT_EQ(code_of([] { split_image_level(cohort(2, 2), {0.5, 0.2, 0.2}, 1); }), Errc::RatioError);
  EXPECT_EQ(code_of([] { split_image_level(cohort(2, 2), {1.2, -0.2, 0.0}, 1); }), Errc::RatioError);
  EXPECT_EQ(code_of([] { split_image_level(cohort(1, 0, 1), {0.5, 0.2, 0.3}, 1); }), Errc::TooFewSamples);
}

TEST(ImageLevel, StratifiedWithinOneImagePerClass) {
  const Dataset d = cohort(19, 38);
  const auto labels = labels_of(d);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Split s = split_image_level(d, {}, seed);
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      double sick = 0;
      for (const auto& r : *part) sick += labels.at(r.patient_id) == Label::Sick;
      EXPECT_LE(std::abs(sick - part->size() * (38.0 / 57.0)), 1.0);
    }
  }
}

TEST(ImageLevel, LeaksOnEverySeed) {
  const Dataset d = cohort(19, 38);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const LeakageReport r = verify_split(split_image_level(d, {}, seed));
    EXPECT_GT(r.leaked(), 0U) << seed;
    EXPECT_EQ(r.total_patients, 57U);
    EXPECT_EQ(r.total_samples, 1140U);
  }
}

TEST(PatientLevel, ThirtyNineSeventeenWith57Patients) {
  const Dataset d = cohort(19, 38);
  PatientSplitOptions opt;
  opt.val_fraction_of_train = 0.0;
  const Split s = split_patient_level(d, opt, 3);
  EXPECT_EQ(s.train.size(), 780U);
  EXPECT_EQ(s.test.size(), 340U);
  EXPECT_EQ(s.val.size(), 20U);  // the leftover 57th patient
  expect_partition(d, s);
}

TEST(PatientLevel, LeftoverCanGoToTrain) {
  PatientSplitOptions opt;
  opt.val_fraction_of_train = 0.0;
  opt.leftover = LeftoverPolicy::Train;
  const Split s = split_patient_level(cohort(19, 38), opt, 3);
  EXPECT_EQ(s.train.size(), 800U);
  EXPECT_EQ(s.test.size(), 340U);
  EXPECT_TRUE(s.val.empty());
}

TEST(PatientLevel, DefaultValidationIsCarvedFromTrainPatients) {
  const Split s = split_patient_level(cohort(19, 38), {}, 3);
  EXPECT_EQ(s.test.size(), 340U);
  EXPECT_EQ(patients_of(s.train).size() + patients_of(s.val).size(), 40U);
  EXPECT_EQ(patients_of(s.val).size(), 9U);  // round(0.2 * 39) carved + the leftover
}

TEST(PatientLevel, DisjointAndStratified) {
  const Dataset d = cohort(19, 38);
  const auto labels = labels_of(d);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Split s = split_patient_level(d, {}, seed);
    EXPECT_EQ(verify_split(s).leaked(), 0U);
    const auto train = patients_of(s.train), test = patients_of(s.test);
    for (const auto& id : test) EXPECT_EQ(train.count(id), 0U);
    int sick = 0;
    for (const auto& id : test) sick += labels.at(id) == Label::Sick;
    EXPECT_LE(std::abs(sick - 17.0 * 38.0 / 57.0), 1.0);
    expect_partition(d, s);
  }
}

TEST(PatientLevel, TwoPatientsOneEach) {
  const Dataset d = cohort(1, 1);
  PatientSplitOptions opt{1, 1, 0.0, LeftoverPolicy::Validation};
  const Split s = split_patient_level(d, opt, 5);
  ASSERT_EQ(patients_of(s.train).size(), 1U);
  ASSERT_EQ(patients_of(s.test).size(), 1U);
  EXPECT_EQ(s.train.size(), 20U);
  EXPECT_EQ(s.test.size(), 20U);
  EXPECT_NE(*patients_of(s.train).begin(), *patients_of(s.test).begin());
}

TEST(PatientLevel, Errors) {
  EXPECT_EQ(code_of([] { split_patient_level(cohort(19, 38), {50, 17, 0.2}, 1); }), Errc::InsufficientPatients);
  EXPECT_EQ(code_of([] { split_patient_level(cohort(4, 0), {2, 2, 0.0}, 1); }), Errc::SingleClassPart);
  Dataset dup = cohort(2, 2);
  dup[1].patient_id = dup[0].patient_id;
  EXPECT_EQ(code_of([&] { split_patient_level(dup, {2, 2, 0.0}, 1); }), Errc::DuplicatePatient);
}

TEST(PatientLevel, Deterministic) {
  EXPECT_EQ(split_patient_level(cohort(19, 38), {}, 11), split_patient_level(cohort(19, 38), {}, 11));
}

TEST(SizeStudy, FoldsOn57PatientCohort) {
  const Dataset d = cohort(19, 38);
  const auto labels = labels_of(d);
  const auto folds = make_size_study_folds(d, 4, {10, 20, 30, 40, 47}, 2);
  ASSERT_EQ(folds.size(), 4U);
  for (const auto& f : folds) {
    ASSERT_EQ(f.test_patients.size(), 10U);
    int sick = 0;
    for (const auto& id : f.test_patients) sick += labels.at(id) == Label::Sick;
    EXPECT_EQ(sick, 5);
    EXPECT_EQ(f.train_subsets.at(47).size(), 47U);
    const std::set<std::string> test(f.test_patients.begin(), f.test_patients.end());
    std::set<std::string> previous;
    for (const auto& [size, ids] : f.train_subsets) {
      EXPECT_EQ(static_cast<int>(ids.size()), size);
      const std::set<std::string> current(ids.begin(), ids.end());
      for (const auto& id : previous) EXPECT_EQ(current.count(id), 1U) << "nested at " << size;
      for (const auto& id : current) EXPECT_EQ(test.count(id), 0U);
      previous = current;
    }
  }
}

TEST(SizeStudy, SubsetsBalancedAsFarAsPoolsAllow) {
  const Dataset d = cohort(28, 29);
  const auto labels = labels_of(d);
  for (const auto& f : make_size_study_folds(d, 4, {10, 20, 30, 40, 47}, 5)) {
    for (const auto& [size, ids] : f.train_subsets) {
      int sick = 0;
      for (const auto& id : ids) sick += labels.at(id) == Label::Sick;
      EXPECT_LE(std::abs(2 * sick - size), 1) << size;
    }
  }
  // With 14 healthy left after testing, larger subsets fill up with sick patients.
  const Dataset skewed = cohort(19, 38);
  const auto skewed_labels = labels_of(skewed);
  const auto f = make_size_study_folds(skewed, 1, {20, 40}, 5).front();
  int healthy = 0;
  for (const auto& id : f.train_subsets.at(40)) healthy += skewed_labels.at(id) == Label::Healthy;
  EXPECT_EQ(healthy, 14);
}

TEST(SizeStudy, TestSetsDrawnIndependentlyPerFold) {
  const auto folds = make_size_study_folds(cohort(19, 38), 4, {10, 47}, 2);
  EXPECT_NE(folds[0].test_patients, folds[1].test_patients);
}

TEST(SizeStudy, InsufficientPatients) {
  EXPECT_EQ(code_of([] { make_size_study_folds(cohort(19, 37), 4, {10, 47}, 1); }), Errc::InsufficientPatients);
  EXPECT_EQ(code_of([] { make_size_study_folds(cohort(4, 60), 4, {10}, 1); }), Errc::InsufficientPatients);
}

TEST(Verify, EmptySplit) {
  const LeakageReport r = verify_split(Split{});
  EXPECT_EQ(r.leaked(), 0U);
  EXPECT_EQ(r.total_patients, 0U);
  EXPECT_EQ(r.total_samples, 0U);
}

TEST(Verify, ListsLeakedPatients) {
  Split s;
  s.train = {{"A", 0}, {"B", 0}};
  s.test = {{"B", 1}, {"C", 0}};
  s.val = {{"C", 1}};
  const LeakageReport r = verify_split(s);
  EXPECT_EQ(r.leaked_patients, (std::vector<std::string>{"B", "C"}));
}

TEST(CarveValidation, WholePatientsStratified) {
  const Dataset d = cohort(10, 10);
  std::vector<std::string> ids;
  for (const auto& p : d) ids.push_back(p.patient_id);
  const auto part = carve_validation(d, ids, 0.2, 4);
  EXPECT_EQ(part.val.size(), 4U);
  EXPECT_EQ(part.train.size(), 16U);
  const auto labels = labels_of(d);
  int sick = 0;
  for (const auto& id : part.val) sick += labels.at(id) == Label::Sick;
  EXPECT_EQ(sick, 2);
}

TEST(Json, RoundTrip) {
  const Split s = split_patient_level(cohort(5, 6, 3), {6, 3, 0.2}, 8);
  const Split back = split_from_json(split_to_json(s));
  EXPECT_EQ(back, s);
  EXPECT_NE(split_to_json(s).find("\"approach\":\"patient_level\""), std::string::npos);
  EXPECT_THROW(split_from_json("{\"approach\":\"x\"}"), Error);
}

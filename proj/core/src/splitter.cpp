#include "thermocad/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "thermocad/error.hpp"
#include "thermocad/random.hpp"

namespace thermocad::split {

using dataio::Label;
using nlohmann::json;

std::string_view to_string(Approach approach) noexcept {
  return approach == Approach::ImageLevel ? "image_level" : "patient_level";
}

Dataset describe(const dataio::Cohort& cohort) {
  Dataset out;
  out.reserve(cohort.patients.size());
  for (const auto& p : cohort.patients) {
    out.push_back({p.patient_id, p.label, static_cast<int>(p.frame_paths.size())});
  }
  return out;
}

namespace {

constexpr std::size_t kClasses = 2;

std::size_t class_index(Label label) { return label == Label::Sick ? 1 : 0; }

/// Splits `total` proportionally to `weights` with largest-remainder
/// rounding; equal remainders go to the lower index.
std::vector<int> largest_remainder(int total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  if (total <= 0 || sum <= 0.0) return out;
  std::vector<double> frac(weights.size());
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact + 1e-12));
    frac[i] = exact - out[i];
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    if (weights[order[k]] > 0.0) {
      ++out[order[k]];
      ++assigned;
    }
  }
  return out;
}

/// Proportional allocation of k patients over classes, capped by what each
/// class still has available; overflow moves to classes with room.
std::vector<int> capped_allocation(int k, const std::vector<int>& available, const std::vector<double>& weights) {
  std::vector<int> take = largest_remainder(k, weights);
  int overflow = 0;
  for (std::size_t c = 0; c < take.size(); ++c) {
    if (take[c] > available[c]) {
      overflow += take[c] - available[c];
      take[c] = available[c];
    }
  }
  for (std::size_t c = 0; c < take.size() && overflow > 0; ++c) {
    const int room = available[c] - take[c];
    const int moved = std::min(room, overflow);
    take[c] += moved;
    overflow -= moved;
  }
  if (overflow > 0) raise(Errc::InsufficientPatients, "not enough patients for the requested parts");
  return take;
}

/// Patient ids per class, sorted by id and then shuffled with `rng`.
std::vector<std::vector<std::string>> shuffled_classes(const Dataset& dataset, Rng& rng) {
  std::vector<std::vector<std::string>> classes(kClasses);
  for (const auto& p : dataset) classes[class_index(p.label)].push_back(p.patient_id);
  for (auto& ids : classes) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(std::span<std::string>(ids));
  }
  return classes;
}

const PatientEntry& find_patient(const Dataset& dataset, const std::string& id) {
  auto it = std::find_if(dataset.begin(), dataset.end(), [&](const PatientEntry& p) { return p.patient_id == id; });
  if (it == dataset.end()) raise(Errc::InsufficientPatients, "unknown patient " + id);
  return *it;
}

void check_unique(const Dataset& dataset) {
  std::set<std::string> seen;
  for (const auto& p : dataset) {
    if (!seen.insert(p.patient_id).second) raise(Errc::DuplicatePatient, "duplicate patient id " + p.patient_id);
  }
}

void require_both_classes(const std::vector<std::string>& part, const Dataset& dataset, const char* name) {
  if (part.size() < 2) return;
  std::set<Label> labels;
  for (const auto& id : part) labels.insert(find_patient(dataset, id).label);
  if (labels.size() < 2) raise(Errc::SingleClassPart, std::string(name) + " part holds a single class");
}

}  // namespace

Split split_image_level(const Dataset& dataset, Ratios ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    raise(Errc::RatioError, "ratios must be non-negative and sum to 1");
  }
  check_unique(dataset);
  Rng rng(seed);

  std::vector<std::vector<SampleRef>> pools(kClasses);
  for (const auto& p : dataset) {
    for (int f = 0; f < p.frames; ++f) pools[class_index(p.label)].push_back({p.patient_id, f});
  }

  Split split;
  split.approach = Approach::ImageLevel;
  split.seed = seed;
  const std::vector<double> weights{ratios.train, ratios.val, ratios.test};
  for (auto& pool : pools) {
    std::sort(pool.begin(), pool.end());
    rng.shuffle(std::span<SampleRef>(pool));
    const std::vector<int> counts = largest_remainder(static_cast<int>(pool.size()), weights);
    auto it = pool.begin();
    split.train.insert(split.train.end(), it, it + counts[0]);
    it += counts[0];
    split.val.insert(split.val.end(), it, it + counts[1]);
    it += counts[1];
    split.test.insert(split.test.end(), it, it + counts[2]);
  }
  if ((ratios.train > 0 && split.train.empty()) || (ratios.val > 0 && split.val.empty()) ||
      (ratios.test > 0 && split.test.empty())) {
    raise(Errc::TooFewSamples, "a part with a non-zero ratio received no samples");
  }
  return split;
}

PatientPartition carve_validation(const Dataset& dataset, std::span<const std::string> patients,
                                  double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) raise(Errc::RatioError, "validation fraction must be in [0, 1)");
  Rng rng(seed);
  std::vector<std::vector<std::string>> classes(kClasses);
  for (const auto& id : patients) classes[class_index(find_patient(dataset, id).label)].push_back(id);
  for (auto& ids : classes) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(std::span<std::string>(ids));
  }
  const int n = static_cast<int>(patients.size());
  const int n_val = static_cast<int>(std::lround(val_fraction * n));
  const std::vector<int> available{static_cast<int>(classes[0].size()), static_cast<int>(classes[1].size())};
  const std::vector<int> take =
      capped_allocation(n_val, available, {static_cast<double>(available[0]), static_cast<double>(available[1])});

  PatientPartition out;
  for (std::size_t c = 0; c < kClasses; ++c) {
    for (std::size_t i = 0; i < classes[c].size(); ++i) {
      (static_cast<int>(i) < take[c] ? out.val : out.train).push_back(classes[c][i]);
    }
  }
  return out;
}

std::vector<SampleRef> frames_of(const Dataset& dataset, std::span<const std::string> patients) {
  std::vector<SampleRef> out;
  for (const auto& id : patients) {
    const PatientEntry& p = find_patient(dataset, id);
    for (int f = 0; f < p.frames; ++f) out.push_back({p.patient_id, f});
  }
  return out;
}

Split split_patient_level(const Dataset& dataset, const PatientSplitOptions& options, std::uint64_t seed) {
  check_unique(dataset);
  const int n = static_cast<int>(dataset.size());
  if (options.train_patients < 1 || options.test_patients < 1 ||
      options.train_patients + options.test_patients > n) {
    raise(Errc::InsufficientPatients, "requested " + std::to_string(options.train_patients) + "+" +
                                          std::to_string(options.test_patients) + " patients from a cohort of " +
                                          std::to_string(n));
  }
  Rng rng(seed);
  auto classes = shuffled_classes(dataset, rng);
  if (classes[0].empty() || classes[1].empty()) raise(Errc::SingleClassPart, "cohort holds a single class");

  const std::vector<double> weights{static_cast<double>(classes[0].size()), static_cast<double>(classes[1].size())};
  std::vector<int> available{static_cast<int>(classes[0].size()), static_cast<int>(classes[1].size())};
  const std::vector<int> test_take = capped_allocation(options.test_patients, available, weights);
  for (std::size_t c = 0; c < kClasses; ++c) available[c] -= test_take[c];
  const std::vector<int> train_take = capped_allocation(options.train_patients, available, weights);

  std::vector<std::string> test_ids, train_ids, leftover_ids;
  for (std::size_t c = 0; c < kClasses; ++c) {
    const auto& ids = classes[c];
    for (int i = 0; i < static_cast<int>(ids.size()); ++i) {
      if (i < test_take[c]) {
        test_ids.push_back(ids[i]);
      } else if (i < test_take[c] + train_take[c]) {
        train_ids.push_back(ids[i]);
      } else {
        leftover_ids.push_back(ids[i]);
      }
    }
  }
  if (options.leftover == LeftoverPolicy::Train) {
    train_ids.insert(train_ids.end(), leftover_ids.begin(), leftover_ids.end());
    leftover_ids.clear();
  }
  require_both_classes(train_ids, dataset, "train");
  require_both_classes(test_ids, dataset, "test");

  PatientPartition carved{train_ids, {}};
  if (options.val_fraction_of_train > 0.0) {
    carved = carve_validation(dataset, train_ids, options.val_fraction_of_train, Rng::derive(seed, {1}));
  }
  carved.val.insert(carved.val.end(), leftover_ids.begin(), leftover_ids.end());

  Split split;
  split.approach = Approach::PatientLevel;
  split.seed = seed;
  split.train = frames_of(dataset, carved.train);
  split.val = frames_of(dataset, carved.val);
  split.test = frames_of(dataset, test_ids);
  return split;
}

std::vector<SizeStudyFold> make_size_study_folds(const Dataset& dataset, int n_folds, std::vector<int> sizes,
                                                 std::uint64_t seed) {
  check_unique(dataset);
  constexpr int kTestPerClass = 5;
  if (sizes.empty() || n_folds < 1) raise(Errc::ConfigError, "size study needs at least one size and fold");
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  if (sizes.front() < 1) raise(Errc::ConfigError, "train subset sizes must be >= 1");

  std::size_t per_class[kClasses] = {0, 0};
  for (const auto& p : dataset) ++per_class[class_index(p.label)];
  if (per_class[0] < kTestPerClass || per_class[1] < kTestPerClass) {
    raise(Errc::InsufficientPatients, "need at least 5 patients per class for the test fold");
  }
  if (static_cast<int>(dataset.size()) < sizes.back() + 2 * kTestPerClass) {
    raise(Errc::InsufficientPatients, "cohort of " + std::to_string(dataset.size()) + " cannot hold " +
                                          std::to_string(sizes.back()) + " train + 10 test patients");
  }

  std::vector<SizeStudyFold> folds;
  for (int f = 0; f < n_folds; ++f) {
    Rng rng(Rng::derive(seed, {static_cast<std::uint64_t>(f)}));
    auto classes = shuffled_classes(dataset, rng);
    SizeStudyFold fold;
    fold.fold_index = f;
    for (auto& ids : classes) {
      fold.test_patients.insert(fold.test_patients.end(), ids.begin(), ids.begin() + kTestPerClass);
      ids.erase(ids.begin(), ids.begin() + kTestPerClass);
    }

    // Interleave the classes so every prefix is as balanced as the pools allow.
    std::vector<std::string> order;
    std::size_t taken[kClasses] = {0, 0};
    while (taken[0] < classes[0].size() || taken[1] < classes[1].size()) {
      const bool healthy_first = taken[0] <= taken[1];
      std::size_t c = healthy_first ? 0 : 1;
      if (taken[c] >= classes[c].size()) c = 1 - c;
      order.push_back(classes[c][taken[c]++]);
    }
    for (int size : sizes) {
      fold.train_subsets[size] = std::vector<std::string>(order.begin(), order.begin() + size);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

LeakageReport verify_split(const Split& split) {
  std::map<std::string, unsigned> parts;
  auto mark = [&](const std::vector<SampleRef>& refs, unsigned bit) {
    for (const auto& r : refs) parts[r.patient_id] |= bit;
  };
  mark(split.train, 1U);
  mark(split.val, 2U);
  mark(split.test, 4U);

  LeakageReport report;
  report.total_patients = parts.size();
  report.total_samples = split.train.size() + split.val.size() + split.test.size();
  for (const auto& [id, bits] : parts) {
    if ((bits & (bits - 1)) != 0) report.leaked_patients.push_back(id);
  }
  return report;
}

namespace {

json refs_to_json(const std::vector<SampleRef>& refs) {
  json arr = json::array();
  for (const auto& r : refs) arr.push_back(json::array({r.patient_id, r.frame_index}));
  return arr;
}

std::vector<SampleRef> refs_from_json(const json& arr) {
  if (!arr.is_array()) raise(Errc::SchemaError, "split part must be an array");
  std::vector<SampleRef> out;
  for (const json& item : arr) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_number_integer()) {
      raise(Errc::SchemaError, "sample reference must be [patient_id, frame_index]");
    }
    out.push_back({item[0].get<std::string>(), item[1].get<int>()});
  }
  return out;
}

}  // namespace

std::string split_to_json(const Split& split) {
  json doc;
  doc["approach"] = std::string(to_string(split.approach));
  doc["seed"] = split.seed;
  doc["train"] = refs_to_json(split.train);
  doc["val"] = refs_to_json(split.val);
  doc["test"] = refs_to_json(split.test);
  return doc.dump();
}

Split split_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    raise(Errc::SchemaError, std::string("invalid split JSON: ") + e.what());
  }
  Split split;
  const std::string approach = doc.value("approach", "");
  if (approach == "image_level") {
    split.approach = Approach::ImageLevel;
  } else if (approach == "patient_level") {
    split.approach = Approach::PatientLevel;
  } else {
    raise(Errc::SchemaError, "unknown approach '" + approach + "'");
  }
  split.seed = doc.value("seed", std::uint64_t{0});
  split.train = refs_from_json(doc.value("train", json::array()));
  split.val = refs_from_json(doc.value("val", json::array()));
  split.test = refs_from_json(doc.value("test", json::array()));
  return split;
}

}  // namespace thermocad::split

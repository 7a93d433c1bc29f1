// Acceptance checks, one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "test_util.hpp"
#include "thermocad/harness/experiments.hpp"
#include "thermocad/harness/report.hpp"
#include "thermocad/hpo.hpp"
#include "thermocad/imgproc.hpp"
#include "thermocad/metrics.hpp"
#include "thermocad/nn/weights_io.hpp"
#include "thermocad/splitter.hpp"
#include "thermocad/synthetic.hpp"

using namespace thermocad;
namespace ts = thermocad::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Analytic gradients against central differences, per layer type.
Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto worst = ts::gradient_suite(5, 20240601);
  std::string detail;
  bool ok = true;
  for (const auto& [layer, err] : worst) {
    ok = ok && err < 1e-4;
    detail += format("%s %.1e, ", layer.c_str(), err);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 120.0, detail + format("%.2fs", secs)};
}

// 2. Confusion-matrix metrics and ROC-AUC against counting oracles.
Outcome metric_oracles() {
  Rng rng(2);
  std::size_t mismatches = 0;
  double worst_auc = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<int> labels(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.bernoulli(0.45) ? 1 : 0;
      scores[i] = trial % 2 == 0 ? rng.uniform() : static_cast<double>(rng.below(5)) / 4.0;
    }
    const double threshold = static_cast<double>(rng.below(5)) / 4.0;
    const auto oracle = ts::count_metrics(labels, scores, threshold);
    const auto r = metrics::evaluate_scores(labels, scores, {}, threshold);
    mismatches += r.cm.tp != oracle.tp || r.cm.fp != oracle.fp || r.cm.fn != oracle.fn || r.cm.tn != oracle.tn ||
                  r.accuracy != oracle.accuracy || r.precision != oracle.precision ||
                  r.sensitivity != oracle.sensitivity || std::abs(r.f1 - oracle.f1) > 1e-15;
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> labels(200);
    std::vector<double> scores(200);
    for (std::size_t i = 0; i < 200; ++i) {
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
      scores[i] = trial % 4 == 0 ? static_cast<double>(rng.below(20)) / 19.0 : rng.uniform();
    }
    labels[0] = 1;
    labels[1] = 0;
    worst_auc = std::max(worst_auc, std::abs(metrics::roc_auc(labels, scores) - ts::brute_force_auc(labels, scores)));
  }
  return {mismatches == 0 && worst_auc <= 1e-12,
          format("%zu metric mismatches over 1000 vectors; max AUC error %.1e over 100 vectors", mismatches, worst_auc)};
}

split::Dataset full_sized_dataset() {
  split::Dataset d;
  for (int i = 0; i < 57; ++i) {
    d.push_back({format("P%03d", i + 1), i < 19 ? dataio::Label::Healthy : dataio::Label::Sick, 20});
  }
  return d;
}

// 3. Patient-level splits never leak; image-level splits always do.
Outcome split_invariants() {
  const auto d = full_sized_dataset();
  int patient_leaks = 0, image_leaking_seeds = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    patient_leaks += static_cast<int>(split::verify_split(split::split_patient_level(d, {}, seed)).leaked());
    image_leaking_seeds += split::verify_split(split::split_image_level(d, {}, seed)).leaked() >= 1;
  }
  split::PatientSplitOptions opt;
  opt.val_fraction_of_train = 0.0;
  const auto s = split::split_patient_level(d, opt, 0);
  const bool counts = s.train.size() == 780 && s.test.size() == 340;
  return {patient_leaks == 0 && image_leaking_seeds == 100 && counts,
          format("patient-level leaked patients %d; image-level leaking seeds %d/100; 39/17 split %zu/%zu images",
                 patient_leaks, image_leaking_seeds, s.train.size(), s.test.size())};
}

// 4. Image-level splitting inflates test accuracy on a confounded cohort.
Outcome leakage_inflation() {
  const auto t0 = std::chrono::steady_clock::now();
  harness::ExperimentConfig cfg;
  dataio::SyntheticCohortConfig sc;
  sc.hotspot_amplitude = 0.5;
  sc.patient_confound_amplitude = 2.0;
  sc.noise_sigma = 0.05;
  cfg.cohort.frame_rows = 96;
  cfg.cohort.frame_cols = 128;
  cfg.input_rows = 30;
  cfg.input_cols = 36;
  cfg.train.epochs = 20;
  cfg.train.steps_per_epoch = 50;
  cfg.train.batch_size = 16;
  nn::HyperParams hp;
  hp.n_blocks = 2;
  hp.convs_per_block = 1;
  hp.filters = 8;
  hp.dense_units = 32;
  hp.top = nn::TopLayer::Flatten;
  cfg.models = {hp};
  cfg.augment = false;
  double gap = 0.0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    sc.seed = seed;
    cfg.cohort.synthetic = sc;
    cfg.split_seed = seed;
    cfg.seed = seed;
    const auto cohort = harness::prepare_cohort(cfg);
    double acc[2] = {0.0, 0.0};
    for (int approach = 1; approach <= 2; ++approach) {
      cfg.approach = approach;
      const auto report = harness::run_baseline(cfg, cohort);
      if (report.rows.at(0).failed) return {false, "training failed: " + report.rows[0].error};
      acc[approach - 1] = report.rows[0].metrics.accuracy;
    }
    detail += format("seed %d image-level %.3f patient-level %.3f; ", static_cast<int>(seed), acc[0], acc[1]);
    gap += (acc[0] - acc[1]) / 3.0;
  }
  const double secs = seconds_since(t0);
  return {gap >= 0.10 && secs < 1800.0, detail + format("mean gap %.3f, %.0fs", gap, secs)};
}

// 5. The search space enumerates to 207,360 points.
Outcome space_cardinality() {
  std::uint64_t n = 0;
  hpo::SearchSpace{}.enumerate([&](const nn::HyperParams&) { ++n; });
  return {n == 207360, format("%llu points", static_cast<unsigned long long>(n))};
}

// 6. TPE against random search on a planted-optimum objective.
Outcome tpe_efficacy() {
  const auto t0 = std::chrono::steady_clock::now();
  const hpo::SearchSpace space;
  int tpe_not_worse = 0, tpe_found = 0, random_found = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(Rng::derive(seed, {600}));
    const auto optimum = *space.locate(hpo::sample_uniform(space, rng));
    const auto objective = ts::planted_objective(space, optimum);
    hpo::TpeConfig cfg;
    cfg.seed = seed;
    const auto t = hpo::run_tpe(objective, space, 50, cfg);
    const auto r = hpo::run_random(objective, space, 50, seed);
    const double tb = t.trials[*t.best_index()].objective, rb = r.trials[*r.best_index()].objective;
    tpe_not_worse += tb <= rb;
    tpe_found += tb == 0.0;
    random_found += rb == 0.0;
  }
  const double secs = seconds_since(t0);
  return {tpe_not_worse >= 14 && tpe_found >= 18 && secs < 60.0,
          format("TPE best <= random best in %d/20 seeds (need 14); planted optimum found by TPE in %d/20 "
                 "(need 18), by random in %d/20; %.1fs",
                 tpe_not_worse, tpe_found, random_found, secs)};
}

// 7. A 2-block model learns a separable synthetic cohort.
Outcome trainability() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  int passing = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    harness::ExperimentConfig cfg;
    dataio::SyntheticCohortConfig sc;
    sc.n_healthy = 20;
    sc.n_sick = 20;
    sc.hotspot_amplitude = 3.0;
    sc.patient_confound_amplitude = 0.3;
    sc.seed = seed;
    cfg.cohort.synthetic = sc;
    cfg.cohort.frame_rows = 96;
    cfg.cohort.frame_cols = 128;
    cfg.input_rows = 30;
    cfg.input_cols = 36;
    cfg.train.epochs = 15;
    cfg.train.steps_per_epoch = 20;
    cfg.train.batch_size = 16;
    cfg.train.seed = seed;
    cfg.patient_split = {28, 12, 0.25, split::LeftoverPolicy::Validation};
    const auto cohort = harness::prepare_cohort(cfg);
    const auto s = split::split_patient_level(cohort.dataset, cfg.patient_split, seed);
    if (split::verify_split(s).leaked() != 0) return {false, "split leaked"};
    const auto train = cohort.gather(s.train), val = cohort.gather(s.val);
    nn::HyperParams hp;
    hp.n_blocks = 2;
    hp.convs_per_block = 1;
    hp.filters = 8;
    hp.dense_units = 16;
    imgproc::BatchGenerator gen(train, cfg.train.batch_size, cfg.train.steps_per_epoch,
                                imgproc::AugmentationConfig::disabled(seed));
    auto result = nn::train(nn::Model<float>(hp, {1, cfg.input_rows, cfg.input_cols}, seed), gen, val, cfg.train);
    const double f1 = metrics::evaluate(result.model, val).f1;
    passing += f1 >= 0.90;
    detail += format("seed %d val F1 %.3f (best epoch %d); ", static_cast<int>(seed), f1, result.history.best_epoch);
  }
  const double secs = seconds_since(t0);
  return {passing == 3 && secs < 600.0, detail + format("%.0fs", secs)};
}

// 8. Augmentation against training-set size over 4 folds.
Outcome augmentation_vs_size() {
  const auto t0 = std::chrono::steady_clock::now();
  harness::ExperimentConfig cfg;
  cfg.experiment = harness::ExperimentKind::SizeStudy;
  dataio::SyntheticCohortConfig sc;
  sc.n_healthy = 28;
  sc.n_sick = 29;
  sc.hotspot_amplitude = 1.0;
  sc.patient_confound_amplitude = 0.5;
  sc.noise_sigma = 0.05;
  sc.seed = 1;
  cfg.cohort.synthetic = sc;
  cfg.cohort.frame_rows = 96;
  cfg.cohort.frame_cols = 128;
  cfg.input_rows = 30;
  cfg.input_cols = 36;
  cfg.train.epochs = 20;
  cfg.train.steps_per_epoch = 40;
  cfg.train.batch_size = 16;
  cfg.train.early_stop_patience = 5;
  nn::HyperParams hp;
  hp.n_blocks = 2;
  hp.convs_per_block = 1;
  hp.filters = 8;
  hp.dense_units = 32;
  hp.top = nn::TopLayer::Flatten;
  cfg.size_model = hp;
  cfg.augmentation.max_rotation_deg = 45.0;
  cfg.augmentation.zoom_fraction = 0.2;
  cfg.split_seed = 1;
  cfg.seed = 1;
  const auto report = harness::run_size_study(cfg, harness::prepare_cohort(cfg));

  std::map<std::pair<int, bool>, double> f1;
  std::string detail;
  for (const auto& c : report.size_cells) {
    f1[{c.size, c.augmented}] = c.f1;
    if (c.runs != cfg.n_folds) return {false, format("size %d has %d successful runs", c.size, c.runs)};
  }
  bool every_size = true;
  for (int size : cfg.sizes) {
    const double a = f1[{size, true}], p = f1[{size, false}];
    every_size = every_size && a >= p;
    detail += format("n=%d aug %.3f plain %.3f; ", size, a, p);
  }
  const double aug20 = f1[{20, true}], plain30 = f1[{30, false}];
  const bool half_patients = aug20 >= plain30 - 0.02;
  const double secs = seconds_since(t0);
  return {every_size && half_patients,
          detail + format("aug@20 %.3f vs plain@30 %.3f (margin %.3f, strict %s); %.0fs", aug20, plain30,
                          aug20 - plain30, aug20 >= plain30 ? "yes" : "no", secs)};
}

// 9. Seeds reproduce reports, weights round-trip, synthesis is byte-stable.
Outcome determinism() {
  ts::TempDir dir("acceptance9");
  std::vector<std::string> problems;

  harness::ExperimentConfig cfg;
  dataio::SyntheticCohortConfig sc;
  sc.n_healthy = 6;
  sc.n_sick = 6;
  sc.frames_per_patient = 4;
  sc.seed = 9;
  cfg.cohort.synthetic = sc;
  cfg.cohort.frame_rows = 48;
  cfg.cohort.frame_cols = 64;
  cfg.input_rows = 20;
  cfg.input_cols = 24;
  cfg.train.epochs = 2;
  cfg.train.steps_per_epoch = 4;
  cfg.train.batch_size = 8;
  cfg.patient_split = {6, 4, 0.34, split::LeftoverPolicy::Validation};
  nn::HyperParams hp;
  hp.n_blocks = 2;
  hp.convs_per_block = 1;
  hp.filters = 4;
  hp.dense_units = 8;
  hp.dropout = true;
  cfg.models = {hp, hp};
  cfg.models[1].batch_norm = true;
  cfg.seed = 3;
  render_report(harness::run_baseline(cfg, harness::prepare_cohort(cfg)), dir / "a");
  render_report(harness::run_baseline(cfg, harness::prepare_cohort(cfg)), dir / "b");
  const bool csv_same = ts::read_bytes(dir / "a" / "metrics.csv") == ts::read_bytes(dir / "b" / "metrics.csv");
  if (!csv_same) problems.push_back("metrics CSV differs");

  bool weights_exact = true;
  Rng rng(4);
  nn::Tensor<float> x({3, 1, 20, 24});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform());
  for (const auto& h : cfg.models) {
    nn::Model<float> m(h, {1, 20, 24}, 5);
    m.forward(x, nn::Mode::Train);
    nn::save_weights(m, dir / "w.bin");
    nn::Model<float> back = nn::load_weights(dir / "w.bin");
    weights_exact = weights_exact && m.forward(x, nn::Mode::Eval) == back.forward(x, nn::Mode::Eval) &&
                    nn::serialize_weights(m) == nn::serialize_weights(back);
  }
  if (!weights_exact) problems.push_back("weights round trip not exact");

  dataio::SyntheticCohortConfig gen;
  gen.n_healthy = 5;
  gen.n_sick = 5;
  gen.frames_per_patient = 20;
  gen.seed = 7;
  dataio::generate_synthetic_cohort(gen, dir / "gen1");
  dataio::generate_synthetic_cohort(gen, dir / "gen2");
  const auto h1 = ts::hash_tree(dir / "gen1"), h2 = ts::hash_tree(dir / "gen2");
  if (h1 != h2) problems.push_back("synthetic cohort bytes differ");

  std::string detail = format("metrics CSV identical %s; weights bit-exact %s; cohort hash %016llx vs %016llx",
                              csv_same ? "yes" : "no", weights_exact ? "yes" : "no",
                              static_cast<unsigned long long>(h1), static_cast<unsigned long long>(h2));
  return {problems.empty(), detail};
}

// 10. Transform laws on random images.
Outcome transform_laws() {
  Rng rng(10);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const int rows = 2 + static_cast<int>(rng.below(40)), cols = 2 + static_cast<int>(rng.below(40));
    imgproc::ThermalImage raw(rows, cols);
    for (auto& v : raw.data) v = static_cast<float>(rng.uniform(20.0, 40.0));
    const auto img = imgproc::normalize_minmax(raw);
    auto in_unit = [](const imgproc::ThermalImage& t) {
      return std::all_of(t.data.begin(), t.data.end(), [](float v) { return v >= 0.0F && v <= 1.0F; });
    };
    violations += !in_unit(img);
    for (auto axis : {imgproc::FlipAxis::Horizontal, imgproc::FlipAxis::Vertical}) {
      violations += imgproc::flip(imgproc::flip(img, axis), axis) != img;
    }
    violations += imgproc::rotate(img, 0.0) != img;
    violations += imgproc::zoom(img, 1.0) != img;
    Rng noise_rng(static_cast<std::uint64_t>(i));
    violations += imgproc::add_gaussian_noise(img, 0.0, noise_rng) != img;
    violations += !in_unit(imgproc::rotate(img, rng.uniform(0.0, 45.0)));
    violations += !in_unit(imgproc::zoom(img, rng.uniform(1.0, 1.2)));
    violations += !in_unit(imgproc::add_gaussian_noise(img, 0.05, noise_rng));
    imgproc::AugmentationConfig aug;
    violations += !in_unit(imgproc::augment(img, aug, noise_rng));
  }
  return {violations == 0, format("%d violations over 1000 images", violations)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"metric oracles", metric_oracles},
      {"split invariants", split_invariants},
      {"leakage inflation", leakage_inflation},
      {"search-space cardinality", space_cardinality},
      {"TPE efficacy", tpe_efficacy},
      {"trainability", trainability},
      {"augmentation vs size", augmentation_vs_size},
      {"determinism and round trips", determinism},
      {"transform laws", transform_laws},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += !out.pass;
    std::printf("%s criterion %d (%s): %s\n", out.pass ? "PASS" : "FAIL", number, criteria[i].first,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

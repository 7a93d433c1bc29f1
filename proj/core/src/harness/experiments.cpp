#include "thermocad/harness/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <thread>

#include "thermocad/nn/weights_io.hpp"

namespace thermocad::harness {

namespace {

enum : std::uint64_t {
  kBaselineModelTag = 31,
  kBaselinePickTag = 32,
  kTpeModelTag = 33,
  kSizeModelTag = 34,
  kSizeValTag = 35,
  kTrainTag = 36,
  kAugTag = 37,
};

dataio::Mask full_mask(int rows, int cols) {
  dataio::Mask m;
  m.rows = rows;
  m.cols = cols;
  m.data.assign(static_cast<std::size_t>(rows) * cols, 1);
  return m;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results are
// written by index, so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

void assert_no_leak(const split::Split& s) {
  const auto report = split::verify_split(s);
  if (report.leaked() > 0) {
    raise(Errc::ConfigError, "patient-level split leaks " + std::to_string(report.leaked()) + " patients, first " +
                                 report.leaked_patients.front());
  }
}

std::optional<std::size_t> pick_best(const std::vector<RunRow>& rows) {
  std::vector<metrics::MetricsReport> ok;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].failed) continue;
    ok.push_back(rows[i].metrics);
    index.push_back(i);
  }
  if (ok.empty()) return std::nullopt;
  return index[metrics::select_best(ok)];
}

std::filesystem::path weights_file(const ExperimentConfig& cfg, const std::string& model_id) {
  if (!cfg.save_weights) return {};
  return cfg.output_dir / "weights" / (model_id + ".tcadw");
}

}  // namespace

std::vector<imgproc::LabeledImage> PreparedCohort::gather(std::span<const split::SampleRef> refs) const {
  std::vector<imgproc::LabeledImage> out;
  out.reserve(refs.size());
  for (const auto& ref : refs) {
    const auto& seq = frames.at(ref.patient_id);
    out.push_back({seq.at(static_cast<std::size_t>(ref.frame_index)), labels.at(ref.patient_id), ref.patient_id});
  }
  return out;
}

PreparedCohort prepare_cohort(const ExperimentConfig& cfg) {
  PreparedCohort out;
  if (cfg.cohort.synthetic) {
    for (auto& p : dataio::synthesize_cohort(*cfg.cohort.synthetic, cfg.cohort.frame_rows, cfg.cohort.frame_cols)) {
      auto& seq = out.frames[p.patient_id];
      for (const auto& f : p.frames) seq.push_back(imgproc::preprocess(f, p.mask, cfg.input_rows, cfg.input_cols));
      out.labels[p.patient_id] = static_cast<int>(p.label);
      out.dataset.push_back({p.patient_id, p.label, static_cast<int>(p.frames.size())});
    }
    return out;
  }
  const dataio::Cohort cohort = dataio::load_manifest(cfg.cohort.manifest);
  for (const auto& rec : cohort.patients) {
    const dataio::Mask mask = rec.mask_path ? dataio::load_mask(*rec.mask_path, rec.patient_id)
                                            : full_mask(dataio::kFrameRows, dataio::kFrameCols);
    auto& seq = out.frames[rec.patient_id];
    int index = 0;
    for (const auto& path : rec.frame_paths) {
      const auto frame = dataio::load_thermal_matrix(path, {}, rec.patient_id, index++);
      seq.push_back(imgproc::preprocess(frame, mask, cfg.input_rows, cfg.input_cols));
    }
    out.labels[rec.patient_id] = static_cast<int>(rec.label);
    out.dataset.push_back({rec.patient_id, rec.label, static_cast<int>(rec.frame_paths.size())});
  }
  return out;
}

RunRow train_and_evaluate(const nn::HyperParams& hp, std::span<const imgproc::LabeledImage> train,
                          std::span<const imgproc::LabeledImage> val, std::span<const imgproc::LabeledImage> test,
                          const ExperimentConfig& cfg, bool augmented, std::uint64_t model_seed,
                          const std::filesystem::path& weights_path) {
  RunRow row;
  row.hp = hp;
  row.augmented = augmented;
  row.model_seed = model_seed;
  try {
    if (train.empty() || val.empty() || test.empty()) raise(Errc::EmptyDataset, "train, val and test must be nonempty");
    imgproc::AugmentationConfig aug =
        augmented ? cfg.augmentation : imgproc::AugmentationConfig::disabled(cfg.augmentation.seed);
    aug.seed = Rng::derive(model_seed, {kAugTag});
    nn::TrainConfig tc = cfg.train;
    tc.seed = Rng::derive(model_seed, {kTrainTag});
    tc.checkpoint_path.clear();
    const nn::InputShape shape{1, train.front().image.rows, train.front().image.cols};
    nn::Model<float> model(hp, shape, model_seed);
    imgproc::BatchGenerator gen(train, tc.batch_size, tc.steps_per_epoch, aug);
    auto result = nn::train(std::move(model), gen, val, tc);
    row.history = std::move(result.history);
    row.metrics = metrics::evaluate(result.model, test, cfg.threshold, cfg.aggregate);
    if (!weights_path.empty()) {
      std::filesystem::create_directories(weights_path.parent_path());
      nn::save_weights(result.model, weights_path);
      row.weights_path = weights_path;
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

RunReport run_baseline(const ExperimentConfig& cfg, const PreparedCohort& cohort) {
  RunReport report;
  report.experiment = ExperimentKind::Baseline;
  report.config_json = config_to_json(cfg);

  const split::Split s = cfg.approach == 1
                             ? split::split_image_level(cohort.dataset, cfg.ratios, cfg.split_seed)
                             : split::split_patient_level(cohort.dataset, cfg.patient_split, cfg.split_seed);
  if (s.approach == split::Approach::PatientLevel) assert_no_leak(s);
  report.splits.push_back(s);

  std::vector<nn::HyperParams> models = cfg.models;
  if (models.empty()) {
    Rng rng(Rng::derive(cfg.seed, {kBaselinePickTag}));
    const hpo::SearchSpace space;
    for (int i = 0; i < 4; ++i) models.push_back(hpo::sample_uniform(space, rng));
  }

  const auto train = cohort.gather(s.train);
  const auto val = cohort.gather(s.val);
  const auto test = cohort.gather(s.test);
  report.rows.resize(models.size());
  parallel_for(models.size(), cfg.threads, [&](std::size_t i) {
    const auto seed = Rng::derive(cfg.seed, {kBaselineModelTag, i});
    const std::string id = "cnn" + std::to_string(i + 1);
    RunRow row = train_and_evaluate(models[i], train, val, test, cfg, cfg.augment, seed, weights_file(cfg, id));
    row.model_id = id;
    row.metrics.model_id = row.model_id;
    row.approach = s.approach;
    row.split_seed = cfg.split_seed;
    report.rows[i] = std::move(row);
  });
  report.best_row = pick_best(report.rows);
  return report;
}

RunReport run_tpe_search(const ExperimentConfig& cfg, const PreparedCohort& cohort) {
  RunReport report;
  report.experiment = ExperimentKind::TpeSearch;
  report.config_json = config_to_json(cfg);

  const split::Split s = split::split_patient_level(cohort.dataset, cfg.patient_split, cfg.split_seed);
  assert_no_leak(s);
  report.splits.push_back(s);
  const auto train = cohort.gather(s.train);
  const auto val = cohort.gather(s.val);
  const auto test = cohort.gather(s.test);

  const std::uint64_t model_seed = Rng::derive(cfg.seed, {kTpeModelTag});
  hpo::ObjectiveData data;
  data.train = train;
  data.val = val;
  data.train_cfg = cfg.train;
  data.train_cfg.seed = Rng::derive(model_seed, {kTrainTag});
  data.train_cfg.checkpoint_path.clear();
  data.augmentation = cfg.augment ? cfg.augmentation : imgproc::AugmentationConfig::disabled();
  data.augmentation.seed = Rng::derive(model_seed, {kAugTag});
  data.model_seed = model_seed;

  std::filesystem::create_directories(cfg.output_dir);
  hpo::TpeConfig tpe = cfg.tpe;
  const auto history_path = cfg.output_dir / "trials.jsonl";
  report.trials = hpo::run_tpe(hpo::cnn_objective(data), hpo::SearchSpace{}, cfg.n_trials, tpe, history_path);

  // The top trials are retrained with the seeds the objective used and scored on the blind test patients.
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < report.trials->trials.size(); ++i) {
    if (report.trials->trials[i].status == hpo::TrialStatus::Ok) ok.push_back(i);
  }
  std::stable_sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
    return report.trials->trials[a].objective < report.trials->trials[b].objective;
  });
  ok.resize(std::min<std::size_t>(ok.size(), static_cast<std::size_t>(cfg.top_k)));
  report.rows.resize(ok.size());
  parallel_for(ok.size(), cfg.threads, [&](std::size_t r) {
    const auto& trial = report.trials->trials[ok[r]];
    const std::string id = "trial" + std::to_string(trial.trial_index);
    RunRow row =
        train_and_evaluate(trial.params, train, val, test, cfg, cfg.augment, model_seed, weights_file(cfg, id));
    row.model_id = id;
    row.metrics.model_id = row.model_id;
    row.split_seed = cfg.split_seed;
    report.rows[r] = std::move(row);
  });
  report.best_row = pick_best(report.rows);
  return report;
}

RunReport run_size_study(const ExperimentConfig& cfg, const PreparedCohort& cohort) {
  RunReport report;
  report.experiment = ExperimentKind::SizeStudy;
  report.config_json = config_to_json(cfg);

  const auto folds = split::make_size_study_folds(cohort.dataset, cfg.n_folds, cfg.sizes, cfg.split_seed);

  struct Task {
    int fold;
    int size;
    bool augmented;
    std::size_t split_index;
  };
  std::vector<Task> tasks;
  for (const auto& fold : folds) {
    for (int size : cfg.sizes) {
      const auto& patients = fold.train_subsets.at(size);
      const auto val_seed = Rng::derive(cfg.split_seed, {kSizeValTag, static_cast<std::uint64_t>(fold.fold_index),
                                                         static_cast<std::uint64_t>(size)});
      const auto part = split::carve_validation(cohort.dataset, patients, cfg.size_val_fraction, val_seed);
      split::Split s;
      s.approach = split::Approach::PatientLevel;
      s.seed = val_seed;
      s.train = split::frames_of(cohort.dataset, part.train);
      s.val = split::frames_of(cohort.dataset, part.val);
      s.test = split::frames_of(cohort.dataset, fold.test_patients);
      assert_no_leak(s);
      report.splits.push_back(std::move(s));
      for (bool augmented : {false, true}) tasks.push_back({fold.fold_index, size, augmented, report.splits.size() - 1});
    }
  }

  report.rows.resize(tasks.size());
  parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto& s = report.splits[t.split_index];
    const auto train = cohort.gather(s.train);
    const auto val = cohort.gather(s.val);
    const auto test = cohort.gather(s.test);
    // Both arms of a cell share initial weights so only augmentation differs.
    const auto seed = Rng::derive(cfg.seed, {kSizeModelTag, static_cast<std::uint64_t>(t.fold),
                                             static_cast<std::uint64_t>(t.size)});
    RunRow row = train_and_evaluate(cfg.size_model, train, val, test, cfg, t.augmented, seed);
    row.model_id = "fold" + std::to_string(t.fold) + "_n" + std::to_string(t.size) + (t.augmented ? "_aug" : "_noaug");
    row.metrics.model_id = row.model_id;
    row.fold = t.fold;
    row.size = t.size;
    row.split_seed = s.seed;
    report.rows[i] = std::move(row);
  });

  for (int size : cfg.sizes) {
    for (bool augmented : {false, true}) {
      SizeCell cell;
      cell.size = size;
      cell.augmented = augmented;
      for (const auto& row : report.rows) {
        if (row.failed || row.size != size || row.augmented != augmented) continue;
        ++cell.runs;
        cell.accuracy += row.metrics.accuracy;
        cell.precision += row.metrics.precision;
        cell.sensitivity += row.metrics.sensitivity;
        cell.f1 += row.metrics.f1;
      }
      if (cell.runs > 0) {
        cell.accuracy /= cell.runs;
        cell.precision /= cell.runs;
        cell.sensitivity /= cell.runs;
        cell.f1 /= cell.runs;
      }
      report.size_cells.push_back(cell);
    }
  }
  report.best_row = pick_best(report.rows);
  return report;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const PreparedCohort cohort = prepare_cohort(cfg);
  switch (cfg.experiment) {
    case ExperimentKind::TpeSearch:
      return run_tpe_search(cfg, cohort);
    case ExperimentKind::SizeStudy:
      return run_size_study(cfg, cohort);
    case ExperimentKind::Baseline:
      break;
  }
  return run_baseline(cfg, cohort);
}

}  // namespace thermocad::harness

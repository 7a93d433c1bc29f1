#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "thermocad/dataio.hpp"
#include "thermocad/error.hpp"
#include "thermocad/harness/config.hpp"
#include "thermocad/harness/experiments.hpp"
#include "thermocad/harness/report.hpp"
#include "thermocad/metrics.hpp"
#include "thermocad/nn/weights_io.hpp"
#include "thermocad/splitter.hpp"
#include "thermocad/synthetic.hpp"

namespace fs = std::filesystem;
using namespace thermocad;

namespace {

enum Exit : int { kOk = 0, kConfigError = 2, kDataError = 3, kTrainingFailure = 4 };

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::OutOfScope:
    case Errc::InvalidHyperParams:
    case Errc::RatioError:
      return kConfigError;
    case Errc::SpatialCollapse:
    case Errc::NonFiniteLoss:
      return kTrainingFailure;
    default:
      return kDataError;
  }
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  bool no_augment = false;
};

harness::ExperimentConfig load_with_overrides(const CommonFlags& f) {
  if (f.config.empty()) raise(Errc::ConfigError, "--config is required");
  harness::ExperimentConfig cfg = harness::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.threads) cfg.threads = *f.threads;
  if (f.no_augment) cfg.augment = false;
  return cfg;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_synth(const dataio::SyntheticCohortConfig& syn, const std::string& out) {
  if (out.empty()) raise(Errc::ConfigError, "--out is required");
  syn.validate();
  const dataio::Cohort cohort = dataio::generate_synthetic_cohort(syn, out);
  std::printf("wrote %zu patients (%zu healthy, %zu sick), %zu frames to %s\n", cohort.patients.size(),
              cohort.count(dataio::Label::Healthy), cohort.count(dataio::Label::Sick), cohort.total_frames(),
              (fs::path(out) / "manifest.json").string().c_str());
  return kOk;
}

int print_validation(const dataio::Cohort& cohort) {
  const dataio::ValidationReport rep = dataio::validate_cohort(cohort);
  std::printf("patients %zu (healthy %zu, sick %zu), frames %zu\n", rep.patients.size(), rep.n_healthy, rep.n_sick,
              rep.total_frames);
  for (const auto& issue : rep.issues) std::printf("issue: %s\n", issue.c_str());
  return rep.ok() ? kOk : kDataError;
}

int run_validate(const CommonFlags& f, const std::string& manifest) {
  if (!manifest.empty()) return print_validation(dataio::load_manifest(manifest));
  const harness::ExperimentConfig cfg = load_with_overrides(f);
  cfg.validate();
  std::printf("config ok: experiment %s\n", std::string(harness::to_string(cfg.experiment)).c_str());
  if (cfg.cohort.manifest.empty()) return kOk;
  return print_validation(dataio::load_manifest(cfg.cohort.manifest));
}

int run_preprocess(const CommonFlags& f) {
  harness::ExperimentConfig cfg = load_with_overrides(f);
  cfg.validate();
  if (f.out.empty()) raise(Errc::ConfigError, "--out is required");
  const fs::path out = f.out;
  fs::create_directories(out / "frames");

  const harness::PreparedCohort cohort = harness::prepare_cohort(cfg);
  nlohmann::json sidecar{{"rows", cfg.input_rows},
                         {"cols", cfg.input_cols},
                         {"normalization", "per-image min-max to [0, 1]"},
                         {"patients", nlohmann::json::array()}};
  std::size_t written = 0;
  for (const auto& [id, images] : cohort.frames) {
    nlohmann::json p{{"id", id},
                     {"label", std::string(dataio::to_string(static_cast<dataio::Label>(cohort.labels.at(id))))},
                     {"frames", nlohmann::json::array()}};
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%02zu", i);
      const fs::path rel = fs::path("frames") / (id + "_" + name + ".txt");
      dataio::ThermalFrame frame{id, static_cast<int>(i), images[i].rows, images[i].cols, images[i].data};
      dataio::write_thermal_matrix(out / rel, frame);
      p["frames"].push_back(rel.generic_string());
      ++written;
    }
    sidecar["patients"].push_back(p);
  }
  std::ofstream(out / "preprocessed.json") << sidecar.dump(2) << "\n";
  std::printf("wrote %zu preprocessed frames (%dx%d) to %s\n", written, cfg.input_rows, cfg.input_cols,
              out.string().c_str());
  return kOk;
}

int run_experiment_cmd(const CommonFlags& f, harness::ExperimentKind kind) {
  harness::ExperimentConfig cfg = load_with_overrides(f);
  cfg.experiment = kind;
  cfg.save_weights = true;
  cfg.validate();

  const harness::RunReport report = harness::run_experiment(cfg);
  const auto files = harness::render_report(report, cfg.output_dir);
  std::size_t failed = 0;
  for (const auto& row : report.rows) {
    if (row.failed) {
      ++failed;
      std::fprintf(stderr, "run %s failed: %s\n", row.model_id.c_str(), row.error.c_str());
    }
  }
  for (const auto& path : files) std::printf("wrote %s\n", path.string().c_str());
  if (report.best_row) {
    const auto& best = report.rows[*report.best_row];
    std::printf("best %s: accuracy %.4f f1 %.4f sensitivity %.4f\n", best.model_id.c_str(), best.metrics.accuracy,
                best.metrics.f1, best.metrics.sensitivity);
  }
  if (!report.rows.empty() && failed == report.rows.size()) {
    std::fprintf(stderr, "all %zu runs failed\n", failed);
    return kTrainingFailure;
  }
  return kOk;
}

// Test frames for evaluate: the split stored in a report or split file,
// otherwise the baseline split rebuilt from the config.
split::Split evaluation_split(const harness::ExperimentConfig& cfg, const harness::PreparedCohort& cohort,
                              const std::string& split_path) {
  if (!split_path.empty()) {
    const auto j = nlohmann::json::parse(read_file(split_path), nullptr, false);
    if (j.is_discarded()) raise(Errc::ConfigError, split_path + " is not JSON");
    if (j.contains("splits")) {
      if (j["splits"].empty()) raise(Errc::ConfigError, split_path + " holds no split");
      return split::split_from_json(j["splits"][0].dump());
    }
    return split::split_from_json(j.dump());
  }
  return cfg.approach == 1 ? split::split_image_level(cohort.dataset, cfg.ratios, cfg.split_seed)
                           : split::split_patient_level(cohort.dataset, cfg.patient_split, cfg.split_seed);
}

int run_evaluate(const CommonFlags& f, const std::string& weights, const std::string& split_path) {
  harness::ExperimentConfig cfg = load_with_overrides(f);
  cfg.validate();
  if (weights.empty()) raise(Errc::ConfigError, "--weights is required");
  nn::Model<float> model = nn::load_weights(weights);
  const harness::PreparedCohort cohort = harness::prepare_cohort(cfg);
  const split::Split s = evaluation_split(cfg, cohort, split_path);
  const auto test = cohort.gather(s.test);
  if (test.empty()) raise(Errc::EmptyDataset, "split has no test frames");

  metrics::MetricsReport m = metrics::evaluate(model, test, cfg.threshold, cfg.aggregate);
  m.model_id = fs::path(weights).stem().string();
  const std::string csv = metrics::csv_header() + "\n" + metrics::csv_row(m) + "\n";
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    std::ofstream(fs::path(f.out) / "evaluation.csv") << csv;
    std::ofstream(fs::path(f.out) / "evaluation.json") << metrics::to_json(m) << "\n";
  }
  std::fputs(csv.c_str(), stdout);
  return kOk;
}

int run_report(const std::string& dir) {
  if (dir.empty()) raise(Errc::ConfigError, "--out is required");
  const fs::path root = dir;
  std::fputs(read_file(root / "metrics.csv").c_str(), stdout);
  if (fs::exists(root / "size_study.csv")) std::fputs(read_file(root / "size_study.csv").c_str(), stdout);
  const auto j = nlohmann::json::parse(read_file(root / "report.json"), nullptr, false);
  if (j.is_discarded()) raise(Errc::SchemaError, "report.json is not JSON");
  if (j.contains("best_model") && j["best_model"].is_string()) {
    std::printf("best model: %s\n", j["best_model"].get<std::string>().c_str());
  } else {
    std::printf("best model: none\n");
  }
  return kOk;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "experiment config JSON");
  if (config_required) opt->required();
  cmd->add_option("--seed", f.seed, "overrides the config seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-augment", f.no_augment, "train without augmentation");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal breast image CNN toolkit"};
  app.require_subcommand(1);

  CommonFlags f;
  dataio::SyntheticCohortConfig syn;
  std::string manifest, weights, split_path;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort on disk");
  synth->add_option("--out", f.out, "output directory")->required();
  synth->add_option("--seed", syn.seed, "cohort seed");
  synth->add_option("--healthy", syn.n_healthy, "healthy patients");
  synth->add_option("--sick", syn.n_sick, "sick patients");
  synth->add_option("--frames", syn.frames_per_patient, "frames per patient");
  synth->add_option("--hotspot", syn.hotspot_amplitude, "hot-spot amplitude, degC");
  synth->add_option("--confound", syn.patient_confound_amplitude, "per-patient texture amplitude, degC");
  synth->add_option("--noise", syn.noise_sigma, "frame noise sigma, degC");

  auto* validate = app.add_subcommand("validate", "check a config and its cohort, or a manifest");
  add_common(validate, f, false);
  validate->add_option("--manifest", manifest, "cohort manifest to check");

  auto* preprocess = app.add_subcommand("preprocess", "write preprocessed frames and a sidecar JSON");
  add_common(preprocess, f, true);

  auto* baseline = app.add_subcommand("baseline", "train baseline models");
  add_common(baseline, f, true);
  auto* tpe = app.add_subcommand("tpe", "tree-Parzen hyperparameter search");
  add_common(tpe, f, true);
  auto* size = app.add_subcommand("size-study", "augmentation against training-set size");
  add_common(size, f, true);

  auto* evaluate = app.add_subcommand("evaluate", "score saved weights on the test split");
  add_common(evaluate, f, true);
  evaluate->add_option("--weights", weights, "weights file")->required();
  evaluate->add_option("--split", split_path, "split JSON or report.json; default rebuilds the baseline split");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--out", f.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (synth->parsed()) return run_synth(syn, f.out);
    if (validate->parsed()) return run_validate(f, manifest);
    if (preprocess->parsed()) return run_preprocess(f);
    if (baseline->parsed()) return run_experiment_cmd(f, harness::ExperimentKind::Baseline);
    if (tpe->parsed()) return run_experiment_cmd(f, harness::ExperimentKind::TpeSearch);
    if (size->parsed()) return run_experiment_cmd(f, harness::ExperimentKind::SizeStudy);
    if (evaluate->parsed()) return run_evaluate(f, weights, split_path);
    if (report->parsed()) return run_report(f.out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return kOk;
}

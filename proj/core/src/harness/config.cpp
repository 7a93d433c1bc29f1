#include "thermocad/harness/config.hpp"

#include <fstream>
#include <sstream>

#include "../json_convert.hpp"
#include "json.hpp"

namespace thermocad::harness {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

ExperimentKind parse_kind(const std::string& name) {
  if (name == "baseline") return ExperimentKind::Baseline;
  if (name == "tpe") return ExperimentKind::TpeSearch;
  if (name == "size_study") return ExperimentKind::SizeStudy;
  if (name == "sota_benchmark" || name == "state_of_the_art") {
    raise(Errc::OutOfScope, "experiment '" + name + "' (pretrained architecture benchmark) is out of scope");
  }
  raise(Errc::ConfigError, "unknown experiment '" + name + "'");
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::Baseline:
      return "baseline";
    case ExperimentKind::TpeSearch:
      return "tpe";
    case ExperimentKind::SizeStudy:
      return "size_study";
  }
  return "baseline";
}

void ExperimentConfig::validate() const {
  if (experiment == ExperimentKind::Baseline && approach != 1 && approach != 2) {
    raise(Errc::ConfigError, "approach must be 1 or 2");
  }
  if (cohort.manifest.empty() && !cohort.synthetic) raise(Errc::ConfigError, "cohort needs a manifest or synthetic");
  if (cohort.synthetic) cohort.synthetic->validate();
  if (cohort.frame_rows < 2 || cohort.frame_cols < 2) raise(Errc::ConfigError, "frame size must be at least 2x2");
  if (input_rows < 2 || input_cols < 2) raise(Errc::ConfigError, "input size must be at least 2x2");
  augmentation.validate();
  train.validate();
  for (const auto& hp : models) hp.validate();
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) raise(Errc::ConfigError, "ratios must sum to 1");
  tpe.validate();
  if (n_trials < 1) raise(Errc::ConfigError, "n_trials must be >= 1");
  if (top_k < 1) raise(Errc::ConfigError, "top_k must be >= 1");
  if (n_folds < 1) raise(Errc::ConfigError, "n_folds must be >= 1");
  if (sizes.empty()) raise(Errc::ConfigError, "sizes must not be empty");
  if (!(size_val_fraction >= 0.0 && size_val_fraction < 1.0)) raise(Errc::ConfigError, "val_fraction must lie in [0, 1)");
  size_model.validate();
  if (!(threshold >= 0.0 && threshold <= 1.0)) raise(Errc::ConfigError, "threshold must lie in [0, 1]");
  if (threads < 1) raise(Errc::ConfigError, "threads must be >= 1");
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) raise(Errc::ConfigError, "config must be a JSON object");
    if (!j.contains("schema_version")) raise(Errc::ConfigError, "missing schema_version");
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      raise(Errc::ConfigError, "unsupported schema_version " + j.at("schema_version").dump());
    }
    cfg.experiment = parse_kind(j.at("experiment").get<std::string>());
    read(j, "approach", cfg.approach);

    if (j.contains("cohort")) {
      const json& c = j.at("cohort");
      if (c.contains("manifest")) cfg.cohort.manifest = resolve(base_dir, c.at("manifest").get<std::string>());
      if (c.contains("synthetic")) {
        const json& s = c.at("synthetic");
        dataio::SyntheticCohortConfig sc;
        read(s, "n_healthy", sc.n_healthy);
        read(s, "n_sick", sc.n_sick);
        read(s, "frames_per_patient", sc.frames_per_patient);
        read(s, "hotspot_amplitude", sc.hotspot_amplitude);
        read(s, "hotspot_sigma", sc.hotspot_sigma);
        read(s, "patient_confound_amplitude", sc.patient_confound_amplitude);
        read(s, "noise_sigma", sc.noise_sigma);
        read(s, "seed", sc.seed);
        cfg.cohort.synthetic = sc;
        read(s, "frame_rows", cfg.cohort.frame_rows);
        read(s, "frame_cols", cfg.cohort.frame_cols);
      }
    }
    if (j.contains("input")) {
      read(j.at("input"), "rows", cfg.input_rows);
      read(j.at("input"), "cols", cfg.input_cols);
    }
    if (j.contains("augmentation")) {
      const json& a = j.at("augmentation");
      read(a, "enabled", cfg.augment);
      read(a, "horizontal_flip", cfg.augmentation.horizontal_flip);
      read(a, "vertical_flip", cfg.augmentation.vertical_flip);
      read(a, "max_rotation_deg", cfg.augmentation.max_rotation_deg);
      read(a, "zoom_fraction", cfg.augmentation.zoom_fraction);
      read(a, "noise_sigma", cfg.augmentation.noise_sigma);
      read(a, "seed", cfg.augmentation.seed);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      read(t, "epochs", cfg.train.epochs);
      read(t, "steps_per_epoch", cfg.train.steps_per_epoch);
      read(t, "batch_size", cfg.train.batch_size);
      if (t.contains("base_lr") && !t.at("base_lr").is_null()) cfg.train.base_lr = t.at("base_lr").get<double>();
      read(t, "lr_decay", cfg.train.lr_decay);
      read(t, "early_stop_patience", cfg.train.early_stop_patience);
      read(t, "seed", cfg.train.seed);
      read(t, "eval_chunk", cfg.train.eval_chunk);
    }
    if (j.contains("models")) cfg.models = j.at("models").get<std::vector<nn::HyperParams>>();
    if (j.contains("split")) {
      const json& s = j.at("split");
      read(s, "seed", cfg.split_seed);
      if (s.contains("ratios")) {
        read(s.at("ratios"), "train", cfg.ratios.train);
        read(s.at("ratios"), "val", cfg.ratios.val);
        read(s.at("ratios"), "test", cfg.ratios.test);
      }
      read(s, "train_patients", cfg.patient_split.train_patients);
      read(s, "test_patients", cfg.patient_split.test_patients);
      read(s, "val_fraction", cfg.patient_split.val_fraction_of_train);
      if (s.contains("leftover")) {
        const auto name = s.at("leftover").get<std::string>();
        if (name == "validation") cfg.patient_split.leftover = split::LeftoverPolicy::Validation;
        else if (name == "train") cfg.patient_split.leftover = split::LeftoverPolicy::Train;
        else raise(Errc::ConfigError, "leftover must be 'validation' or 'train'");
      }
    }
    if (j.contains("tpe")) {
      const json& t = j.at("tpe");
      read(t, "gamma", cfg.tpe.gamma);
      read(t, "n_startup_random", cfg.tpe.n_startup_random);
      read(t, "n_candidates", cfg.tpe.n_candidates);
      read(t, "prior_weight", cfg.tpe.prior_weight);
      read(t, "seed", cfg.tpe.seed);
      read(t, "n_trials", cfg.n_trials);
      read(t, "top_k", cfg.top_k);
    }
    if (j.contains("size_study")) {
      const json& s = j.at("size_study");
      read(s, "n_folds", cfg.n_folds);
      read(s, "sizes", cfg.sizes);
      read(s, "val_fraction", cfg.size_val_fraction);
      if (s.contains("model")) cfg.size_model = s.at("model").get<nn::HyperParams>();
    }
    if (j.contains("metrics")) {
      const json& m = j.at("metrics");
      if (m.contains("aggregate")) cfg.aggregate = metrics::parse_aggregate(m.at("aggregate").get<std::string>());
      read(m, "threshold", cfg.threshold);
    }
    read(j, "seed", cfg.seed);
    read(j, "threads", cfg.threads);
    read(j, "save_weights", cfg.save_weights);
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  } catch (const json::exception& e) {
    raise(Errc::ConfigError, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::OutOfScope || e.code() == Errc::ConfigError) throw;
    raise(Errc::ConfigError, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ConfigError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = std::string(to_string(cfg.experiment));
  j["approach"] = cfg.approach;
  json cohort = json::object();
  if (!cfg.cohort.manifest.empty()) cohort["manifest"] = cfg.cohort.manifest.string();
  if (cfg.cohort.synthetic) {
    const auto& s = *cfg.cohort.synthetic;
    cohort["synthetic"] = {{"n_healthy", s.n_healthy},
                           {"n_sick", s.n_sick},
                           {"frames_per_patient", s.frames_per_patient},
                           {"hotspot_amplitude", s.hotspot_amplitude},
                           {"hotspot_sigma", s.hotspot_sigma},
                           {"patient_confound_amplitude", s.patient_confound_amplitude},
                           {"noise_sigma", s.noise_sigma},
                           {"seed", s.seed},
                           {"frame_rows", cfg.cohort.frame_rows},
                           {"frame_cols", cfg.cohort.frame_cols}};
  }
  j["cohort"] = cohort;
  j["input"] = {{"rows", cfg.input_rows}, {"cols", cfg.input_cols}};
  const auto& a = cfg.augmentation;
  j["augmentation"] = {{"enabled", cfg.augment},
                       {"horizontal_flip", a.horizontal_flip},
                       {"vertical_flip", a.vertical_flip},
                       {"max_rotation_deg", a.max_rotation_deg},
                       {"zoom_fraction", a.zoom_fraction},
                       {"noise_sigma", a.noise_sigma},
                       {"seed", a.seed}};
  const auto& t = cfg.train;
  j["train"] = {{"epochs", t.epochs},
                {"steps_per_epoch", t.steps_per_epoch},
                {"batch_size", t.batch_size},
                {"base_lr", t.base_lr ? json(*t.base_lr) : json(nullptr)},
                {"lr_decay", t.lr_decay},
                {"early_stop_patience", t.early_stop_patience},
                {"seed", t.seed},
                {"eval_chunk", t.eval_chunk}};
  j["models"] = cfg.models;
  j["split"] = {{"seed", cfg.split_seed},
                {"ratios", {{"train", cfg.ratios.train}, {"val", cfg.ratios.val}, {"test", cfg.ratios.test}}},
                {"train_patients", cfg.patient_split.train_patients},
                {"test_patients", cfg.patient_split.test_patients},
                {"val_fraction", cfg.patient_split.val_fraction_of_train},
                {"leftover", cfg.patient_split.leftover == split::LeftoverPolicy::Train ? "train" : "validation"}};
  j["tpe"] = {{"gamma", cfg.tpe.gamma},
              {"n_startup_random", cfg.tpe.n_startup_random},
              {"n_candidates", cfg.tpe.n_candidates},
              {"prior_weight", cfg.tpe.prior_weight},
              {"seed", cfg.tpe.seed},
              {"n_trials", cfg.n_trials},
              {"top_k", cfg.top_k}};
  j["size_study"] = {{"n_folds", cfg.n_folds},
                     {"sizes", cfg.sizes},
                     {"val_fraction", cfg.size_val_fraction},
                     {"model", cfg.size_model}};
  j["metrics"] = {{"aggregate", std::string(metrics::to_string(cfg.aggregate))}, {"threshold", cfg.threshold}};
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["save_weights"] = cfg.save_weights;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2);
}

}  // namespace thermocad::harness

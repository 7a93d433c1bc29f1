#include "thermocad/hpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "json_convert.hpp"
#include "thermocad/metrics.hpp"

namespace thermocad::hpo {

namespace {

template <typename V>
std::optional<std::size_t> index_in(const std::vector<V>& domain, const V& value) {
  const auto it = std::find(domain.begin(), domain.end(), value);
  if (it == domain.end()) return std::nullopt;
  return static_cast<std::size_t>(it - domain.begin());
}

std::size_t draw_categorical(const std::vector<double>& p, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (u < p[i]) return i;
    u -= p[i];
  }
  return p.size() - 1;
}

Point draw_uniform_point(const SearchSpace& space, Rng& rng) {
  const auto sizes = space.sizes();
  Point p{};
  for (std::size_t d = 0; d < kDims; ++d) p[d] = rng.below(sizes[d]);
  return p;
}

}  // namespace

std::array<std::size_t, kDims> SearchSpace::sizes() const {
  return {n_blocks.size(), convs_per_block.size(), filters.size(),   kernel.size(),
          pool.size(),     dense_units.size(),     l2.size(),        optimizer.size(),
          dropout.size(),  batch_norm.size(),      activation.size(), top.size()};
}

std::uint64_t SearchSpace::cardinality() const {
  std::uint64_t n = 1;
  for (std::size_t s : sizes()) n *= s;
  return n;
}

HyperParams SearchSpace::at(const Point& p) const {
  HyperParams hp;
  hp.n_blocks = n_blocks.at(p[0]);
  hp.convs_per_block = convs_per_block.at(p[1]);
  hp.filters = filters.at(p[2]);
  hp.kernel = kernel.at(p[3]);
  hp.pool = pool.at(p[4]);
  hp.dense_units = dense_units.at(p[5]);
  hp.l2 = l2.at(p[6]);
  hp.optimizer = optimizer.at(p[7]);
  hp.dropout = dropout.at(p[8]);
  hp.batch_norm = batch_norm.at(p[9]);
  hp.activation = activation.at(p[10]);
  hp.top = top.at(p[11]);
  return hp;
}

std::optional<Point> SearchSpace::locate(const HyperParams& hp) const {
  const std::array<std::optional<std::size_t>, kDims> idx{
      index_in(n_blocks, hp.n_blocks),     index_in(convs_per_block, hp.convs_per_block),
      index_in(filters, hp.filters),       index_in(kernel, hp.kernel),
      index_in(pool, hp.pool),             index_in(dense_units, hp.dense_units),
      index_in(l2, hp.l2),                 index_in(optimizer, hp.optimizer),
      index_in(dropout, hp.dropout),       index_in(batch_norm, hp.batch_norm),
      index_in(activation, hp.activation), index_in(top, hp.top)};
  Point p{};
  for (std::size_t d = 0; d < kDims; ++d) {
    if (!idx[d]) return std::nullopt;
    p[d] = *idx[d];
  }
  return p;
}

Point SearchSpace::decode(std::uint64_t index) const {
  if (index >= cardinality()) raise(Errc::OutOfRange, "search-space index out of range");
  const auto s = sizes();
  Point p{};
  for (std::size_t d = kDims; d-- > 0;) {
    p[d] = index % s[d];
    index /= s[d];
  }
  return p;
}

void SearchSpace::enumerate(const std::function<void(const HyperParams&)>& visit) const {
  const std::uint64_t n = cardinality();
  for (std::uint64_t i = 0; i < n; ++i) visit(at(decode(i)));
}

std::string Trial::to_json_line() const {
  nlohmann::json j{{"trial_index", trial_index},
                   {"params", params},
                   {"status", status == TrialStatus::Ok ? "ok" : "failed"},
                   {"duration", duration}};
  j["objective"] = std::isfinite(objective) ? nlohmann::json(objective) : nlohmann::json(nullptr);
  if (!message.empty()) j["message"] = message;
  return j.dump();
}

Trial Trial::from_json_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Trial t;
    t.trial_index = j.at("trial_index").get<int>();
    t.params = j.at("params").get<HyperParams>();
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") raise(Errc::FormatError, "unknown trial status '" + status + "'");
    t.status = status == "ok" ? TrialStatus::Ok : TrialStatus::Failed;
    t.duration = j.value("duration", 0.0);
    t.message = j.value("message", std::string());
    if (t.status == TrialStatus::Ok) {
      t.objective = j.at("objective").get<double>();
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::FormatError, std::string("bad trial line: ") + e.what());
  }
}

void TpeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) raise(Errc::ConfigError, "gamma must lie in (0, 1)");
  if (n_startup_random < 0) raise(Errc::ConfigError, "n_startup_random must be >= 0");
  if (n_candidates < 1) raise(Errc::ConfigError, "n_candidates must be >= 1");
  if (!(prior_weight > 0.0)) raise(Errc::ConfigError, "prior_weight must be positive");
}

std::optional<std::size_t> TrialHistory::best_index() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].status != TrialStatus::Ok) continue;
    if (!best || trials[i].objective < trials[*best].objective) best = i;
  }
  return best;
}

std::size_t TrialHistory::ok_count() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.status == TrialStatus::Ok; }));
}

HyperParams sample_uniform(const SearchSpace& space, Rng& rng) { return space.at(draw_uniform_point(space, rng)); }

std::vector<std::vector<double>> fit_density(const SearchSpace& space, std::span<const Point> points,
                                             double prior_weight) {
  const auto sizes = space.sizes();
  std::vector<std::vector<double>> density(kDims);
  const double total = static_cast<double>(points.size()) + prior_weight;
  for (std::size_t d = 0; d < kDims; ++d) {
    density[d].assign(sizes[d], prior_weight / static_cast<double>(sizes[d]));
    for (const Point& p : points) density[d][p[d]] += 1.0;
    for (double& v : density[d]) v /= total;
  }
  return density;
}

std::vector<std::size_t> good_indices(std::span<const Trial> history, double gamma) {
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].status == TrialStatus::Ok) ok.push_back(i);
  }
  std::stable_sort(ok.begin(), ok.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].objective < history[b].objective; });
  const auto n_good = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(ok.size())));
  ok.resize(std::min(n_good, ok.size()));
  return ok;
}

HyperParams tpe_propose(std::span<const Trial> history, const SearchSpace& space, const TpeConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].status == TrialStatus::Ok) ok.push_back(i);
  }
  if (ok.empty() || ok.size() < static_cast<std::size_t>(cfg.n_startup_random)) return sample_uniform(space, rng);

  const auto good = good_indices(history, cfg.gamma);
  const std::unordered_set<std::size_t> good_set(good.begin(), good.end());
  std::vector<Point> good_points, bad_points;
  for (std::size_t i : ok) {
    const auto p = space.locate(history[i].params);
    if (!p) continue;  // trials from a different space carry no density information
    (good_set.count(i) ? good_points : bad_points).push_back(*p);
  }
  const auto l = fit_density(space, good_points, cfg.prior_weight);
  const auto g = fit_density(space, bad_points, cfg.prior_weight);

  Point best{};
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < cfg.n_candidates; ++c) {
    Point p{};
    double score = 0.0;
    for (std::size_t d = 0; d < kDims; ++d) {
      p[d] = draw_categorical(l[d], rng);
      score += std::log(l[d][p[d]]) - std::log(g[d][p[d]]);
    }
    if (score > best_score) {
      best_score = score;
      best = p;
    }
  }
  return space.at(best);
}

TrialHistory load_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open " + path.string());
  TrialHistory h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    h.trials.push_back(Trial::from_json_line(line));
    if (h.trials.back().trial_index != static_cast<int>(h.trials.size()) - 1) {
      raise(Errc::FormatError, "trial indices in " + path.string() + " are not consecutive");
    }
  }
  return h;
}

namespace {

enum : std::uint64_t { kTpeTag = 21, kRandomTag = 22 };

Trial evaluate_trial(const Objective& objective, const HyperParams& hp, int index) {
  Trial t;
  t.trial_index = index;
  t.params = hp;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    t.objective = objective(hp);
    if (std::isfinite(t.objective)) {
      t.status = TrialStatus::Ok;
    } else {
      t.objective = std::numeric_limits<double>::infinity();
      t.message = "objective is not finite";
    }
  } catch (const std::exception& e) {
    t.objective = std::numeric_limits<double>::infinity();
    t.message = e.what();
  }
  t.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

}  // namespace

TrialHistory run_tpe(const Objective& objective, const SearchSpace& space, int n_trials, const TpeConfig& cfg,
                     const std::optional<std::filesystem::path>& history_path) {
  cfg.validate();
  TrialHistory h;
  if (history_path && std::filesystem::exists(*history_path)) h = load_history(*history_path);
  std::ofstream log;
  if (history_path) {
    log.open(*history_path, std::ios::app);
    if (!log) raise(Errc::IoError, "cannot append to " + history_path->string());
  }
  for (int i = static_cast<int>(h.trials.size()); i < n_trials; ++i) {
    Rng rng(Rng::derive(cfg.seed, {kTpeTag, static_cast<std::uint64_t>(i)}));
    const HyperParams hp = tpe_propose(h.trials, space, cfg, rng);
    h.trials.push_back(evaluate_trial(objective, hp, i));
    if (log) log << h.trials.back().to_json_line() << '\n' << std::flush;
  }
  return h;
}

TrialHistory run_random(const Objective& objective, const SearchSpace& space, int n_trials, std::uint64_t seed) {
  TrialHistory h;
  for (int i = 0; i < n_trials; ++i) {
    Rng rng(Rng::derive(seed, {kRandomTag, static_cast<std::uint64_t>(i)}));
    h.trials.push_back(evaluate_trial(objective, sample_uniform(space, rng), i));
  }
  return h;
}

Objective cnn_objective(ObjectiveData data) {
  std::unordered_set<std::string> train_ids;
  for (const auto& item : data.train) train_ids.insert(item.patient_id);
  for (const auto& item : data.val) {
    if (train_ids.count(item.patient_id)) {
      raise(Errc::ConfigError, "patient " + item.patient_id + " appears in both train and validation");
    }
  }
  if (data.train.empty() || data.val.empty()) raise(Errc::EmptyDataset, "objective needs train and validation data");
  return [data](const HyperParams& hp) {
    const auto& first = data.train.front().image;
    const nn::InputShape shape{1, first.rows, first.cols};
    nn::Model<float> model(hp, shape, data.model_seed);
    imgproc::BatchGenerator gen(data.train, data.train_cfg.batch_size, data.train_cfg.steps_per_epoch,
                                data.augmentation);
    auto result = nn::train(std::move(model), gen, data.val, data.train_cfg);
    return -metrics::evaluate(result.model, data.val).f1;
  };
}

}  // namespace thermocad::hpo

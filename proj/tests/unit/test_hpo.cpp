#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "planted.hpp"
#include "test_util.hpp"
#include "thermocad/hpo.hpp"

using namespace thermocad;
using namespace thermocad::hpo;
using thermocad::testing::code_of;
using thermocad::testing::TempDir;

namespace {

Trial ok_trial(int index, const HyperParams& hp, double objective) {
  Trial t;
  t.trial_index = index;
  t.params = hp;
  t.objective = objective;
  t.status = TrialStatus::Ok;
  return t;
}

void expect_same_trials(const TrialHistory& a, const TrialHistory& b) {
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].params, b.trials[i].params) << i;
    EXPECT_EQ(a.trials[i].objective, b.trials[i].objective) << i;
    EXPECT_EQ(a.trials[i].status, b.trials[i].status) << i;
  }
}

}  // namespace

TEST(SearchSpace, CardinalityAndEnumeration) {
  const SearchSpace space;
  EXPECT_EQ(space.cardinality(), 207360U);
  std::uint64_t visited = 0;
  std::set<std::string> sample;
  space.enumerate([&](const HyperParams& hp) {
    if (visited % 997 == 0) sample.insert(hp.to_json());
    ++visited;
  });
  EXPECT_EQ(visited, 207360U);
  EXPECT_EQ(sample.size(), (207360U + 996) / 997);
}

TEST(SearchSpace, DecodeAndLocateAreInverse) {
  const SearchSpace space;
  for (std::uint64_t i = 0; i < space.cardinality(); i += 131) {
    const Point p = space.decode(i);
    EXPECT_EQ(space.locate(space.at(p)), p);
  }
  EXPECT_THROW(space.decode(space.cardinality()), Error);
}

TEST(SearchSpace, LocateRejectsOutsideValues) {
  const SearchSpace space;
  HyperParams hp = space.at(space.decode(0));
  EXPECT_TRUE(space.contains(hp));
  hp.n_blocks = 7;
  EXPECT_FALSE(space.contains(hp));
  hp = space.at(space.decode(5));
  hp.l2 = 0.07;
  EXPECT_FALSE(space.contains(hp));
}

TEST(SampleUniform, ChiSquareOnBlocksAndFilters) {
  const SearchSpace space;
  Rng rng(123);
  std::array<int, 3> blocks{};
  std::array<int, 4> filters{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Point p = *space.locate(sample_uniform(space, rng));
    ++blocks[p[0]];
    ++filters[p[2]];
  }
  double chi_blocks = 0.0, chi_filters = 0.0;
  for (int c : blocks) chi_blocks += std::pow(c - n / 3.0, 2) / (n / 3.0);
  for (int c : filters) chi_filters += std::pow(c - n / 4.0, 2) / (n / 4.0);
  EXPECT_LT(chi_blocks, 13.82);   // chi-square 0.999 quantile, 2 dof
  EXPECT_LT(chi_filters, 16.27);  // 3 dof
}

TEST(SampleUniform, ValidAndDeterministic) {
  const SearchSpace space;
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) {
    const HyperParams hp = sample_uniform(space, a);
    EXPECT_NO_THROW(hp.validate());
    EXPECT_TRUE(space.contains(hp));
    EXPECT_EQ(hp, sample_uniform(space, b));
  }
}

TEST(Density, StrictlyPositiveAndNormalized) {
  const SearchSpace space;
  const std::vector<Point> pts{space.decode(0), space.decode(0), space.decode(77)};
  const auto dens = fit_density(space, pts, 1.0);
  const auto sizes = space.sizes();
  for (std::size_t d = 0; d < kDims; ++d) {
    ASSERT_EQ(dens[d].size(), sizes[d]);
    double sum = 0.0;
    for (double v : dens[d]) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  // n_blocks index 0 observed 3 times out of 3 with domain size 3.
  EXPECT_NEAR(dens[0][0], (3 + 1.0 / 3) / 4.0, 1e-12);
  const auto empty = fit_density(space, {}, 1.0);
  EXPECT_NEAR(empty[2][1], 0.25, 1e-12);
}

TEST(GoodSet, CeilGammaOfOkTrials) {
  const SearchSpace space;
  Rng rng(1);
  for (int n = 1; n <= 30; ++n) {
    std::vector<Trial> history;
    for (int i = 0; i < n; ++i) history.push_back(ok_trial(i, sample_uniform(space, rng), rng.uniform()));
    Trial failed;
    failed.trial_index = n;
    history.push_back(failed);
    const auto good = good_indices(history, 0.25);
    EXPECT_EQ(good.size(), static_cast<std::size_t>(std::ceil(0.25 * n))) << n;
    double worst_good = -1.0;
    for (std::size_t i : good) {
      EXPECT_EQ(history[i].status, TrialStatus::Ok);
      worst_good = std::max(worst_good, history[i].objective);
    }
    const std::set<std::size_t> g(good.begin(), good.end());
    for (int i = 0; i < n; ++i) {
      if (!g.count(static_cast<std::size_t>(i))) EXPECT_GE(history[static_cast<std::size_t>(i)].objective, worst_good);
    }
  }
}

TEST(Propose, EmptyAndAllFailedHistoriesSampleUniformly) {
  const SearchSpace space;
  const TpeConfig cfg;
  std::vector<Trial> failed(20);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed), c(seed);
    const HyperParams uniform = sample_uniform(space, a);
    EXPECT_EQ(tpe_propose({}, space, cfg, b), uniform);
    EXPECT_EQ(tpe_propose(failed, space, cfg, c), uniform);
  }
}

TEST(Propose, FavorsValuesOfTheGoodSet) {
  const SearchSpace space;
  Rng rng(4);
  std::vector<Trial> history;
  for (int i = 0; i < 10; ++i) {
    HyperParams hp = sample_uniform(space, rng);
    hp.optimizer = nn::OptimizerKind::Adam;
    history.push_back(ok_trial(i, hp, -1.0));
  }
  for (int i = 10; i < 40; ++i) history.push_back(ok_trial(i, sample_uniform(space, rng), 0.0));
  const TpeConfig cfg;
  int adam = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const HyperParams hp = tpe_propose(history, space, cfg, rng);
    EXPECT_TRUE(space.contains(hp));
    adam += hp.optimizer == nn::OptimizerKind::Adam;
  }
  // Binomial(10^4, 1/3) has a standard deviation of about 47.
  EXPECT_GT(adam, n / 3 + 300);
}

TEST(RunTpe, ConstantObjectiveKeepsFirstTrial) {
  const auto h = run_tpe([](const HyperParams&) { return 0.5; }, SearchSpace{}, 15, TpeConfig{});
  ASSERT_EQ(h.trials.size(), 15U);
  EXPECT_EQ(h.best_index(), 0U);
}

TEST(RunTpe, SingleTrialIsUniformDraw) {
  TpeConfig cfg;
  cfg.seed = 5;
  const auto h = run_tpe([](const HyperParams&) { return 1.0; }, SearchSpace{}, 1, cfg);
  ASSERT_EQ(h.trials.size(), 1U);
  EXPECT_TRUE(SearchSpace{}.contains(h.trials[0].params));
}

TEST(RunTpe, FailuresAreRecordedAndSearchContinues) {
  int calls = 0;
  const auto h = run_tpe(
      [&](const HyperParams& hp) -> double {
        ++calls;
        if (hp.pool == 3) raise(Errc::SpatialCollapse, "collapsed");
        return static_cast<double>(hp.n_blocks);
      },
      SearchSpace{}, 20, TpeConfig{});
  EXPECT_EQ(calls, 20);
  std::size_t failed = 0;
  for (const auto& t : h.trials) {
    if (t.status == TrialStatus::Failed) {
      ++failed;
      EXPECT_TRUE(std::isinf(t.objective));
      EXPECT_NE(t.message.find("collapsed"), std::string::npos);
    } else {
      EXPECT_TRUE(std::isfinite(t.objective));
    }
  }
  EXPECT_GT(failed, 0U);
  EXPECT_EQ(h.ok_count() + failed, 20U);
  ASSERT_TRUE(h.best_index().has_value());
  EXPECT_EQ(h.trials[*h.best_index()].status, TrialStatus::Ok);
}

TEST(RunTpe, AllFailedHasNoBest) {
  const auto h = run_tpe([](const HyperParams&) -> double { throw std::runtime_error("boom"); }, SearchSpace{}, 3,
                         TpeConfig{});
  EXPECT_EQ(h.ok_count(), 0U);
  EXPECT_FALSE(h.best_index().has_value());
}

TEST(RunTpe, ReproducibleAndResumable) {
  const SearchSpace space;
  const auto objective = thermocad::testing::planted_objective(space, space.decode(123456));
  TpeConfig cfg;
  cfg.seed = 17;
  const auto full = run_tpe(objective, space, 25, cfg);
  expect_same_trials(full, run_tpe(objective, space, 25, cfg));

  TempDir dir("hpo");
  const auto path = dir.path() / "trials.jsonl";
  run_tpe(objective, space, 12, cfg, path);
  EXPECT_EQ(load_history(path).trials.size(), 12U);
  const auto resumed = run_tpe(objective, space, 25, cfg, path);
  expect_same_trials(full, resumed);
  expect_same_trials(full, load_history(path));

  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 25);
}

TEST(RunTpe, ImprovesOnPlantedObjective) {
  const SearchSpace space;
  double tpe_total = 0.0, random_total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 1000);
    const auto objective = thermocad::testing::planted_objective(space, *space.locate(sample_uniform(space, rng)));
    TpeConfig cfg;
    cfg.seed = seed;
    const auto t = run_tpe(objective, space, 50, cfg);
    const auto r = run_random(objective, space, 50, seed);
    tpe_total += t.trials[*t.best_index()].objective;
    random_total += r.trials[*r.best_index()].objective;
  }
  EXPECT_LT(tpe_total, random_total);
}

TEST(Trial, JsonLineRoundTrip) {
  const SearchSpace space;
  Trial ok = ok_trial(3, space.at(space.decode(4242)), -0.875);
  ok.duration = 1.5;
  const Trial back = Trial::from_json_line(ok.to_json_line());
  EXPECT_EQ(back.params, ok.params);
  EXPECT_EQ(back.objective, ok.objective);
  EXPECT_EQ(back.trial_index, 3);
  EXPECT_EQ(back.status, TrialStatus::Ok);

  Trial failed;
  failed.trial_index = 4;
  failed.message = "NonFiniteLoss";
  const std::string line = failed.to_json_line();
  EXPECT_NE(line.find("\"objective\":null"), std::string::npos);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const Trial fb = Trial::from_json_line(line);
  EXPECT_EQ(fb.status, TrialStatus::Failed);
  EXPECT_TRUE(std::isinf(fb.objective));
  EXPECT_THROW(Trial::from_json_line("{not json"), Error);
}

TEST(TpeConfig, Validation) {
  TpeConfig cfg;
  cfg.gamma = 1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::ConfigError);
  cfg = {};
  cfg.n_candidates = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::ConfigError);
  cfg = {};
  cfg.prior_weight = 0.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::ConfigError);
}

namespace {

std::vector<imgproc::LabeledImage> tiny_images(int patients, int offset) {
  Rng rng(static_cast<std::uint64_t>(offset));
  std::vector<imgproc::LabeledImage> out;
  for (int p = 0; p < patients; ++p) {
    for (int f = 0; f < 3; ++f) {
      imgproc::ThermalImage img(12, 12, 0.0F, true);
      for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.0, 0.3));
      const int label = p % 2;
      if (label == 1) img.at(3, 3) = 1.0F;
      out.push_back({img, label, "P" + std::to_string(offset + p)});
    }
  }
  return out;
}

ObjectiveData tiny_data(const std::vector<imgproc::LabeledImage>& train, const std::vector<imgproc::LabeledImage>& val) {
  ObjectiveData d;
  d.train = train;
  d.val = val;
  d.train_cfg.epochs = 1;
  d.train_cfg.steps_per_epoch = 2;
  d.train_cfg.batch_size = 4;
  d.augmentation = imgproc::AugmentationConfig::disabled(3);
  d.model_seed = 8;
  return d;
}

HyperParams tiny_hp() {
  HyperParams hp;
  hp.n_blocks = 1;
  hp.convs_per_block = 1;
  hp.filters = 2;
  hp.dense_units = 4;
  return hp;
}

}  // namespace

TEST(CnnObjective, DeterministicNegativeF1) {
  const auto train = tiny_images(6, 0), val = tiny_images(4, 100);
  const auto objective = cnn_objective(tiny_data(train, val));
  const double a = objective(tiny_hp());
  EXPECT_LE(a, 0.0);
  EXPECT_GE(a, -1.0);
  EXPECT_EQ(a, objective(tiny_hp()));
}

TEST(CnnObjective, CollapseBecomesFailedTrial) {
  const auto train = tiny_images(6, 0), val = tiny_images(4, 100);
  const auto objective = cnn_objective(tiny_data(train, val));
  HyperParams collapsing = tiny_hp();
  collapsing.n_blocks = 4;
  collapsing.pool = 3;
  EXPECT_EQ(code_of([&] { objective(collapsing); }), Errc::SpatialCollapse);
  // A 12 x 12 input survives n pooling stages only while pool^n <= 12.
  const auto h = run_tpe(
      [&](const HyperParams& hp) {
        HyperParams small = tiny_hp();
        small.n_blocks = hp.n_blocks;
        small.pool = hp.pool;
        return objective(small);
      },
      SearchSpace{}, 12, TpeConfig{});
  ASSERT_EQ(h.trials.size(), 12U);
  for (const auto& t : h.trials) {
    const bool collapses = std::pow(t.params.pool, t.params.n_blocks) > 12;
    EXPECT_EQ(t.status == TrialStatus::Failed, collapses) << t.params.describe();
  }
}

TEST(CnnObjective, RejectsSharedPatients) {
  const auto train = tiny_images(6, 0), val = tiny_images(4, 4);
  EXPECT_EQ(code_of([&] { cnn_objective(tiny_data(train, val)); }), Errc::ConfigError);
}

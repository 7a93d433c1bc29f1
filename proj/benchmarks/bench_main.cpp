#include <benchmark/benchmark.h>

#include <vector>

#include "thermocad/hpo.hpp"
#include "thermocad/imgproc.hpp"
#include "thermocad/metrics.hpp"
#include "thermocad/nn/layers.hpp"
#include "thermocad/random.hpp"
#include "thermocad/synthetic.hpp"

using namespace thermocad;

namespace {

nn::Tensor<float> random_tensor(nn::Shape shape, std::uint64_t seed) {
  nn::Tensor<float> t(std::move(shape));
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// Args: channels in, filters, square input side.
void BM_ConvForward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0)), cout = static_cast<int>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  nn::Conv2D<float> conv(cin, cout, 3);
  const auto x = random_tensor({8, static_cast<std::size_t>(cin), side, side}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nn::Mode::Train));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvForward)->Args({1, 8, 32})->Args({8, 16, 32})->Args({16, 16, 64});

void BM_ConvBackward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0)), cout = static_cast<int>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  nn::Conv2D<float> conv(cin, cout, 3);
  const auto x = random_tensor({8, static_cast<std::size_t>(cin), side, side}, 1);
  const auto y = conv.forward(x, nn::Mode::Train);
  const auto g = random_tensor(y.shape(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(g));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvBackward)->Args({1, 8, 32})->Args({8, 16, 32});

void BM_Preprocess(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = rows * 4 / 3;
  dataio::SyntheticCohortConfig cfg;
  const auto patient = dataio::synthetic_patient(cfg, cfg.n_healthy);
  const auto frame = dataio::render_synthetic_frame(cfg, patient, 0, rows, cols);
  const auto mask = dataio::render_synthetic_mask(patient.patient_id, rows, cols);
  for (auto _ : state) benchmark::DoNotOptimize(imgproc::preprocess(frame, mask, 50, 60));
}
BENCHMARK(BM_Preprocess)->Arg(96)->Arg(480);

void BM_ResizeBilinear(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  imgproc::ThermalImage img(side, side);
  Rng rng(3);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform(30.0, 37.0));
  for (auto _ : state) benchmark::DoNotOptimize(imgproc::resize_bilinear(img));
}
BENCHMARK(BM_ResizeBilinear)->Arg(128)->Arg(512);

void BM_RocAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<int> labels(n);
  std::vector<double> scores(n);
  Rng rng(4);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    scores[i] = rng.uniform(0.0, 1.0) + 0.3 * labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::roc_auc(labels, scores));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RocAuc)->RangeMultiplier(8)->Range(64, 1 << 15)->Complexity(benchmark::oNLogN);

void BM_TpePropose(benchmark::State& state) {
  const hpo::SearchSpace space;
  const hpo::TpeConfig cfg;
  Rng rng(5);
  std::vector<hpo::Trial> history;
  for (int i = 0; i < state.range(0); ++i) {
    hpo::Trial t;
    t.trial_index = i;
    t.params = hpo::sample_uniform(space, rng);
    t.objective = rng.uniform(-1.0, 0.0);
    t.status = hpo::TrialStatus::Ok;
    history.push_back(t);
  }
  for (auto _ : state) benchmark::DoNotOptimize(hpo::tpe_propose(history, space, cfg, rng));
}
BENCHMARK(BM_TpePropose)->Arg(10)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "eiqa/losses.hpp"
#include "eiqa/metrics.hpp"
#include "eiqa/models.hpp"
#include "eiqa/sampler.hpp"
#include "eiqa/synthdata.hpp"

namespace {

using namespace eiqa;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void BM_Srcc(benchmark::State& state) {
  const auto a = random_values(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = random_values(a.size(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(srcc(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Srcc)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_Krcc(benchmark::State& state) {
  const auto a = random_values(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = random_values(a.size(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(krcc(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Krcc)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_SupCon(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Matrix e(64, b);
  for (int j = 0; j < b; ++j) {
    for (int i = 0; i < 64; ++i) e(i, j) = n(rng);
    e.col(j).normalize();
  }
  std::vector<int> labels(static_cast<std::size_t>(b));
  for (int j = 0; j < b; ++j) labels[static_cast<std::size_t>(j)] = j % 10;
  for (auto _ : state) benchmark::DoNotOptimize(supcon_loss(e, labels, kDefaultTemperature).value);
}
BENCHMARK(BM_SupCon)->Arg(32)->Arg(128);

void BM_GenerateAndEnhance(benchmark::State& state) {
  const auto ops = make_operator_bank(10, 0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const RawScene raw = generate_scene(seed++, 64, 0);
    benchmark::DoNotOptimize(apply_enhancement(raw, ops[seed % ops.size()]).data().data());
  }
}
BENCHMARK(BM_GenerateAndEnhance);

void BM_Predict(benchmark::State& state) {
  ModelConfig cfg;
  cfg.fusion = static_cast<Fusion>(state.range(0));
  const ModelState model = init_model(cfg);
  Image img(cfg.input_size, cfg.input_size, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(predict(img, model));
}
BENCHMARK(BM_Predict)->Arg(static_cast<int>(Fusion::debias))->Arg(static_cast<int>(Fusion::none));

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  const ModelState model = init_model(cfg);
  ModelState grad = zeros_like(model);
  const int batch = 32;
  std::vector<Image> images;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < batch; ++i) {
    Image img(cfg.input_size, cfg.input_size);
    for (double& v : img.data()) v = u(rng);
    images.push_back(std::move(img));
  }
  const nn::Matrix input = pack_images(images, cfg.input_size);
  const auto targets = random_values(batch, 7);
  for (auto _ : state) {
    PipelineTape tape;
    const PipelineOutput out = pipeline_forward(model, input, batch, &tape);
    std::vector<double> pred(out.prediction.data(), out.prediction.data() + batch);
    const MosLossResult loss = mos_loss(pred, targets, kDefaultHuberDelta, kDefaultPlccWeight);
    pipeline_backward(model, grad, tape, loss.grad);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_ContentControlledEpoch(benchmark::State& state) {
  Manifest m;
  m.k_algorithms = 10;
  m.image_size = 64;
  for (int s = 0; s < 100; ++s)
    for (int a = 0; a < 10; ++a) m.records.push_back({s, s / 10, a, "x.ppm", 50.0});
  SamplerConfig cfg;
  std::uint64_t epoch = 0;
  for (auto _ : state) benchmark::DoNotOptimize(epoch_batches(m, cfg, epoch++).size());
}
BENCHMARK(BM_ContentControlledEpoch);

}  // namespace
BENCHMARK_MAIN();

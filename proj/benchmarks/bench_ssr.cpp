#include <random>

#include <benchmark/benchmark.h>

#include "ssr/adam.hpp"
#include "ssr/recognizer.hpp"
#include "ssr/synth.hpp"

namespace {

using namespace ssr;

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = n(rng);
  return Tensor({r, c}, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_KernelAndAssign(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const Tensor q = random_matrix(n, 64, rng);
  const MemoryBank bank(reshape(random_matrix(8 * 4, 64, rng), {8, 4, 64}));
  for (auto _ : state) benchmark::DoNotOptimize(assign(kernel_scores(q, bank, KernelConfig{})));
}
BENCHMARK(BM_KernelAndAssign)->Arg(8)->Arg(32)->Arg(64);

void BM_Fusion(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Tensor q = random_matrix(32, 64, rng);
  const MemoryBank bank(reshape(random_matrix(8 * 4, 64, rng), {8, 4, 64}));
  const AssignmentMatrix a = assign(kernel_scores(q, bank, KernelConfig{}));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fuse_stroke_level(q, a, bank, StrokeFusion::kConvex));
    benchmark::DoNotOptimize(fuse_component_level(q, a, bank, ComponentFusion::kConvex));
  }
}
BENCHMARK(BM_Fusion);

struct DeskFixture {
  Dataset data = synthesize_dataset(SynthSpec::generate(5, 8, 4, 0.03, 1), 1);
  SsrModel model{ModelConfig::desk(), ScenarioConfig{}, data.label_space, 1};
};

void BM_Inference(benchmark::State& state) {
  DeskFixture f;
  const Sketch& s = f.data.samples[0];
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.predict(s));
  state.counters["strokes"] = static_cast<double>(s.num_strokes());
}
BENCHMARK(BM_Inference)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  DeskFixture f;
  const Sketch& s = f.data.samples[0];
  for (auto _ : state) {
    const ForwardResult fwd = f.model.forward(s);
    total_loss(f.model.losses(fwd, s), f.model.scenario()).backward();
    adam_step(f.model.params(), AdamConfig{});
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

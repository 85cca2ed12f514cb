#include <benchmark/benchmark.h>

#include "vsrlab/degrade.hpp"
#include "vsrlab/disc.hpp"
#include "vsrlab/gen.hpp"
#include "vsrlab/loss.hpp"
#include "vsrlab/rng.hpp"

using namespace vsrlab;

namespace {

Tensor uniform_tensor(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(uniform(rng, 0.0, 1.0));
  return t;
}

gen::GeneratorSpec bench_spec(gen::Variant v) {
  auto s = gen::GeneratorSpec::defaults(v);
  s.base_channels = 16;
  s.num_blocks = 2;
  s.nonlocal_positions = {2};
  return s;
}

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), hw = static_cast<int>(state.range(1));
  const auto x = ag::constant(uniform_tensor({3, c, hw, hw}, 1));
  const auto w = ag::constant(uniform_tensor({c, c, 3, 3}, 2));
  const auto b = ag::constant(Tensor({1, c, 1, 1}));
  for (auto _ : state) benchmark::DoNotOptimize(ag::conv2d(x, w, b).value().storage().data());
  state.SetItemsProcessed(state.iterations() * 3LL * c * c * 9 * hw * hw);
}
BENCHMARK(BM_Conv2d)->ArgNames({"channels", "hw"})->Args({16, 16})->Args({16, 32})->Args({32, 32});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto x = ag::parameter(uniform_tensor({3, 16, 32, 32}, 3));
  const auto w = ag::parameter(uniform_tensor({16, 16, 3, 3}, 4));
  const auto b = ag::parameter(Tensor({1, 16, 1, 1}));
  for (auto _ : state) {
    ag::backward(ag::mean(ag::conv2d(x, w, b)));
    benchmark::DoNotOptimize(w.grad().storage().data());
  }
}
BENCHMARK(BM_Conv2dBackward);

void BM_NonLocal(benchmark::State& state) {
  const auto kind = static_cast<ag::Affinity>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const auto a = ag::constant(uniform_tensor({3, 8, hw, hw}, 5));
  const auto b = ag::constant(uniform_tensor({3, 8, hw, hw}, 6));
  const auto g = ag::constant(uniform_tensor({3, 8, hw, hw}, 7));
  const auto wa = ag::constant(uniform_tensor({1, 8, 1, 1}, 8));
  const auto wb = ag::constant(uniform_tensor({1, 8, 1, 1}, 9));
  for (auto _ : state) benchmark::DoNotOptimize(ag::nonlocal_aggregate(a, b, g, kind, wa, wb).value().storage().data());
  const long long p = 3LL * hw * hw;
  state.counters["positions"] = static_cast<double>(p);
}
BENCHMARK(BM_NonLocal)
    ->ArgNames({"affinity", "hw"})
    ->Args({static_cast<int>(ag::Affinity::embedded_gaussian), 8})
    ->Args({static_cast<int>(ag::Affinity::embedded_gaussian), 16})
    ->Args({static_cast<int>(ag::Affinity::dot_product), 16})
    ->Args({static_cast<int>(ag::Affinity::concatenation), 16});

void BM_GeneratorForward(benchmark::State& state) {
  const auto variant = static_cast<gen::Variant>(state.range(0));
  const gen::Generator g(bench_spec(variant), 10);
  const auto x = ag::constant(uniform_tensor({3, 3, 16, 16}, 11));
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(x).value().storage().data());
}
BENCHMARK(BM_GeneratorForward)
    ->ArgName("variant")
    ->Arg(static_cast<int>(gen::Variant::residual_based))
    ->Arg(static_cast<int>(gen::Variant::rrdb_based))
    ->Unit(benchmark::kMillisecond);

void BM_GeneratorTrainStep(benchmark::State& state) {
  const gen::Generator g(bench_spec(gen::Variant::residual_based), 12);
  const auto x = ag::constant(uniform_tensor({3, 3, 16, 16}, 13));
  const auto y = ag::constant(uniform_tensor({3, 3, 32, 32}, 14));
  for (auto _ : state) {
    ag::backward(loss::mse(y, g.forward(x)));
    for (const auto& p : g.parameters()) p.var.node()->grad = Tensor();
  }
}
BENCHMARK(BM_GeneratorTrainStep)->Unit(benchmark::kMillisecond);

void BM_DiscriminatorForward(benchmark::State& state) {
  const disc::Discriminator d({16, 3}, 15);
  const auto x = ag::constant(uniform_tensor({3, 3, 64, 64}, 16));
  for (auto _ : state) benchmark::DoNotOptimize(d.forward(x).value().storage().data());
}
BENCHMARK(BM_DiscriminatorForward)->Unit(benchmark::kMillisecond);

const seq::FrameSequence& clip() {
  static const seq::FrameSequence c(uniform_tensor({3, 3, 128, 128}, 17));
  return c;
}

void BM_GaussianBlur(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(degrade::gaussian_blur(clip(), 7, 1.5).tensor().storage().data());
}
BENCHMARK(BM_GaussianBlur);

void BM_GaussianNoise(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(degrade::gaussian_noise(clip(), 0.05, 3).tensor().storage().data());
}
BENCHMARK(BM_GaussianNoise);

void BM_FrequencyGuided(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(degrade::frequency_guided(clip(), 0.5, false).tensor().storage().data());
  }
}
BENCHMARK(BM_FrequencyGuided);

void BM_Diffusion(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(degrade::diffusion(clip(), 4, 0.5).tensor().storage().data());
}
BENCHMARK(BM_Diffusion);

void BM_ContentAware(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(degrade::content_aware(clip(), 0.2, 2.0).tensor().storage().data());
}
BENCHMARK(BM_ContentAware);

void BM_Jpeg(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(degrade::jpeg_degrade(clip(), 50).tensor().storage().data());
}
BENCHMARK(BM_Jpeg);

void BM_DefaultPlan(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto plan = degrade::DegradationPlan::default_plan(seed++);
    benchmark::DoNotOptimize(degrade::apply_plan(clip(), plan).output.tensor().storage().data());
  }
}
BENCHMARK(BM_DefaultPlan);

void BM_SsimLoss(benchmark::State& state) {
  const auto a = ag::constant(uniform_tensor({3, 3, 64, 64}, 18));
  const auto b = ag::constant(uniform_tensor({3, 3, 64, 64}, 19));
  for (auto _ : state) benchmark::DoNotOptimize(loss::ssim(a, b).value().item());
}
BENCHMARK(BM_SsimLoss);

}  // namespace

BENCHMARK_MAIN();

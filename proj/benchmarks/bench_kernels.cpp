#include <benchmark/benchmark.h>

#include "dfir/attention.hpp"
#include "dfir/fft.hpp"
#include "dfir/firc3.hpp"
#include "dfir/oracles.hpp"

namespace {

using namespace dfir;

constexpr std::size_t kHeadDim = 32;

struct Qkv {
  Tensor q, k, v;
};

Qkv draw_qkv(std::size_t n) {
  Rng rng(n);
  return {random_tensor({n, kHeadDim}, rng), random_tensor({n, kHeadDim}, rng), random_tensor({n, kHeadDim}, rng)};
}

void BM_DenseAttention(benchmark::State& state) {
  const Qkv t = draw_qkv(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(oracle::dense_attention_reference(t.q, t.k, t.v));
}

// range(1) is the divisor: K = N / range(1).
void BM_TopKAttention(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Qkv t = draw_qkv(n);
  const std::size_t k = std::max<std::size_t>(1, n / static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(topk_attention(t.q, t.k, t.v, k));
  state.counters["K"] = static_cast<double>(k);
}

void BM_ConvDirect(benchmark::State& state) {
  const std::size_t e = static_cast<std::size_t>(state.range(0)), C = 8, ks = 5;
  Rng rng(e);
  const Tensor x = random_tensor({1, C, e, e}, rng);
  const Tensor w = random_tensor({C, 1, ks, ks}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, Tensor(), {C, PaddingMode::circular, 1}));
}

void BM_ConvFft(benchmark::State& state) {
  const std::size_t e = static_cast<std::size_t>(state.range(0)), C = 8, ks = 5;
  Rng rng(e);
  const Tensor x = random_tensor({1, C, e, e}, rng);
  const Tensor taps = random_tensor({C, ks, ks}, rng);
  for (auto _ : state) {
    const PeriodizedKernel kernel = periodize_kernel(taps, e, e);
    ComplexSpectrum X = fft2(x);
    for (std::size_t i = 0; i < X.numel(); ++i) X[i] *= kernel.otf[i];
    benchmark::DoNotOptimize(ifft2(X));
  }
}

BENCHMARK(BM_DenseAttention)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TopKAttention)
    ->ArgsProduct({{256, 1024}, {1, 4, 16, 64}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvDirect)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ConvFft)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

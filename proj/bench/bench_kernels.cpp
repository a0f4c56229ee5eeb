// Parallel packed-GEMM convolution versus the serial reference loops, plus
// a full backbone forward pass.

#include <benchmark/benchmark.h>

#include <random>

#include "l2h/kernels.hpp"
#include "l2h/net.hpp"

namespace {

l2h::Tensor<float> random_tensor(int c, int h, int w, unsigned seed) {
  l2h::Tensor<float> t(c, h, w);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (auto& v : t.data) v = u(rng);
  return t;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int ks = static_cast<int>(state.range(1));
  const int cin = 112, cout = 32;
  auto in = random_tensor(cin, size, size, 1);
  auto w = random_tensor(cout, cin, ks * ks, 2);
  std::vector<float> bias(cout, 0.1f);
  l2h::Tensor<float> out(cout, size, size);
  for (auto _ : state) {
    if constexpr (Parallel)
      l2h::kernels::conv2d_forward<float>(in, w.data, bias, cout, ks, out, 0);
    else
      l2h::reference::conv2d_forward<float>(in, w.data, bias, cout, ks, out, 0);
    benchmark::DoNotOptimize(out.data.data());
  }
  const double flops = 2.0 * cin * cout * ks * ks * size * size;
  state.counters["GFLOPS"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvForward<true>)->Args({64, 3})->Args({64, 5})->Args({256, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<false>)->Args({64, 3})->Args({64, 5})->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_ConvBackwardParams(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int ks = 5, cin = 112, cout = 16;
  auto in = random_tensor(cin, size, size, 1);
  auto gout = random_tensor(cout, size, size, 3);
  std::vector<float> gw(static_cast<std::size_t>(cout) * cin * ks * ks), gb(cout);
  for (auto _ : state) {
    if constexpr (Parallel)
      l2h::kernels::conv2d_backward_params<float>(in, gout, 0, cout, ks, gw, gb);
    else
      l2h::reference::conv2d_backward_params<float>(in, gout, 0, cout, ks, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
  const double flops = 2.0 * cin * cout * ks * ks * size * size;
  state.counters["GFLOPS"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_ConvBackwardParams<true>)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParams<false>)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BackboneForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  l2h::NetConfig cfg;
  cfg.num_classes = 5;
  auto params = l2h::init_params<float>(cfg, 7);
  auto image = random_tensor(3, size, size, 4);
  for (auto _ : state) {
    auto r = l2h::forward(params, cfg, image);
    benchmark::DoNotOptimize(r.cp.data.data());
  }
  state.counters["Mpix/s"] = benchmark::Counter(static_cast<double>(size) * size,
                                                benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_BackboneForward)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

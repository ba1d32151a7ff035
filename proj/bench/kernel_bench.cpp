// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <vector>

#include "d2rl/kernels.hpp"
#include "d2rl/rng.hpp"

namespace {

struct Problem {
  d2rl::kernels::LinearDims dims;
  std::vector<double> x, w, b, y, gy, gw, gb, gx;

  explicit Problem(std::size_t batch, std::size_t width)
      : dims{batch, width, width},
        x(batch * width),
        w(width * width),
        b(width),
        y(batch * width),
        gy(batch * width),
        gw(width * width),
        gb(width),
        gx(batch * width) {
    d2rl::Rng rng(7);
    for (auto* v : {&x, &w, &b, &gy}) {
      for (auto& e : *v) e = rng.normal();
    }
  }
};

void BM_ForwardSerial(benchmark::State& st) {
  Problem p(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    d2rl::kernels::serial::linear_forward(p.dims, p.x, p.w, p.b, p.y);
    benchmark::DoNotOptimize(p.y.data());
  }
}

void BM_ForwardParallel(benchmark::State& st) {
  Problem p(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    d2rl::kernels::parallel::linear_forward(p.dims, p.x, p.w, p.b, p.y);
    benchmark::DoNotOptimize(p.y.data());
  }
}

void BM_BackwardParamsSerial(benchmark::State& st) {
  Problem p(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    d2rl::kernels::serial::linear_backward_params(p.dims, p.x, p.gy, p.gw, p.gb);
    benchmark::DoNotOptimize(p.gw.data());
  }
}

void BM_BackwardParamsParallel(benchmark::State& st) {
  Problem p(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    d2rl::kernels::parallel::linear_backward_params(p.dims, p.x, p.gy, p.gw, p.gb);
    benchmark::DoNotOptimize(p.gw.data());
  }
}

void BM_BackwardInputSerial(benchmark::State& st) {
  Problem p(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    d2rl::kernels::serial::linear_backward_input(p.dims, p.gy, p.w, p.gx);
    benchmark::DoNotOptimize(p.gx.data());
  }
}

void BM_BackwardInputParallel(benchmark::State& st) {
  Problem p(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
  for (auto _ : st) {
    d2rl::kernels::parallel::linear_backward_input(p.dims, p.gy, p.w, p.gx);
    benchmark::DoNotOptimize(p.gx.data());
  }
}

#define D2RL_SIZES ->Args({1, 256})->Args({64, 64})->Args({256, 256})

BENCHMARK(BM_ForwardSerial) D2RL_SIZES;
BENCHMARK(BM_ForwardParallel) D2RL_SIZES;
BENCHMARK(BM_BackwardParamsSerial) D2RL_SIZES;
BENCHMARK(BM_BackwardParamsParallel) D2RL_SIZES;
BENCHMARK(BM_BackwardInputSerial) D2RL_SIZES;
BENCHMARK(BM_BackwardInputParallel) D2RL_SIZES;

}  // namespace

BENCHMARK_MAIN();

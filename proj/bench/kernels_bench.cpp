// Serial reference vs OpenMP kernels on square 1-D grids.

#include <benchmark/benchmark.h>

#include "sfe/kernels.hpp"
#include "sfe/support.hpp"

namespace {

struct Setup {
  explicit Setup(int n) {
    auto grid = sfe::make_grid(1, 4.0, n);
    x = grid->points();
    sfe::kernels::serial::gaussian_log_kernel(x, x, 0.5, 0.0, logk);
    k = logk.array().exp();
    shift = sfe::Vec::LinSpaced(n, -1.0, 1.0);
  }
  sfe::RowMat x, logk, k;
  sfe::Vec shift;
};

template <auto Fn>
void log_kernel(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  sfe::RowMat out;
  for (auto _ : state) {
    Fn(s.x, s.x, 0.5, 0.0, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void logsumexp_rows(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  sfe::Vec out;
  for (auto _ : state) {
    Fn(s.logk, s.shift, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void matvec(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  sfe::Vec out;
  for (auto _ : state) {
    Fn(s.k, s.shift, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void scaled_exp(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  sfe::RowMat out;
  for (auto _ : state) {
    Fn(s.logk, s.shift, s.shift, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(log_kernel<sfe::kernels::serial::gaussian_log_kernel>)->Name("log_kernel/serial")->Arg(256)->Arg(1024);
BENCHMARK(log_kernel<sfe::kernels::parallel::gaussian_log_kernel>)->Name("log_kernel/parallel")->Arg(256)->Arg(1024);
BENCHMARK(logsumexp_rows<sfe::kernels::serial::row_logsumexp>)->Name("row_logsumexp/serial")->Arg(256)->Arg(1024);
BENCHMARK(logsumexp_rows<sfe::kernels::parallel::row_logsumexp>)->Name("row_logsumexp/parallel")->Arg(256)->Arg(1024);
BENCHMARK(matvec<sfe::kernels::serial::matvec>)->Name("matvec/serial")->Arg(256)->Arg(1024);
BENCHMARK(matvec<sfe::kernels::parallel::matvec>)->Name("matvec/parallel")->Arg(256)->Arg(1024);
BENCHMARK(scaled_exp<sfe::kernels::serial::scaled_exp>)->Name("scaled_exp/serial")->Arg(256)->Arg(1024);
BENCHMARK(scaled_exp<sfe::kernels::parallel::scaled_exp>)->Name("scaled_exp/parallel")->Arg(256)->Arg(1024);

BENCHMARK_MAIN();

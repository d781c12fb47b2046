// Serial reference vs OpenMP variant of each kernel. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "histotile/kernels.hpp"
#include "histotile/seed.hpp"

using namespace histotile;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

std::vector<Raster> random_patches(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Raster> out;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::uint8_t> px(150 * 150 * 3);
    for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
    out.emplace_back(150, 150, 3, std::move(px));
  }
  return out;
}

template <Matrix (*F)(MatrixView, MatrixView)>
void BM_pairwise(benchmark::State& state) {
  const Matrix a = random_matrix(static_cast<std::size_t>(state.range(0)), 162, 1);
  for (auto _ : state) benchmark::DoNotOptimize(F(a.view(), a.view()));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <void (*F)(MatrixView, std::size_t, double, std::span<double>)>
void BM_rbf_row(benchmark::State& state) {
  const Matrix a = random_matrix(static_cast<std::size_t>(state.range(0)), 162, 2);
  std::vector<double> out(a.rows);
  std::size_t i = 0;
  for (auto _ : state) {
    F(a.view(), i++ % a.rows, 0.01, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Matrix (*F)(MatrixView, std::span<const double>)>
void BM_covariance(benchmark::State& state) {
  const Matrix a = random_matrix(static_cast<std::size_t>(state.range(0)), 256, 3);
  const std::vector<double> mean(a.cols, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(F(a.view(), mean));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Matrix (*F)(std::span<const Raster>)>
void BM_pftas(benchmark::State& state) {
  const auto patches = random_patches(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(F(patches));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_pairwise<kernels::pairwise_sq_dists_serial>)->Name("pairwise/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_pairwise<kernels::pairwise_sq_dists_parallel>)->Name("pairwise/parallel")->Arg(256)->Arg(1024);
BENCHMARK(BM_rbf_row<kernels::rbf_row_serial>)->Name("rbf_row/serial")->Arg(4096)->Arg(32768);
BENCHMARK(BM_rbf_row<kernels::rbf_row_parallel>)->Name("rbf_row/parallel")->Arg(4096)->Arg(32768);
BENCHMARK(BM_covariance<kernels::covariance_serial>)->Name("covariance/serial")->Arg(1000)->Arg(4000);
BENCHMARK(BM_covariance<kernels::covariance_parallel>)->Name("covariance/parallel")->Arg(1000)->Arg(4000);
BENCHMARK(BM_pftas<kernels::pftas_rows_serial>)->Name("pftas/serial")->Arg(15)->Arg(60);
BENCHMARK(BM_pftas<kernels::pftas_rows_parallel>)->Name("pftas/parallel")->Arg(15)->Arg(60);

BENCHMARK_MAIN();

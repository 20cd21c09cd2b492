// Serial reference vs OpenMP kernels on benchmark-sized inputs.

#include <random>

#include <benchmark/benchmark.h>

#include "dcboost/kernels.hpp"

using namespace dcboost;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (auto& v : m.values()) v = g(rng);
  return m;
}

std::vector<int> cyclic_labels(std::size_t n, int c) {
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i % static_cast<std::size_t>(c));
  return l;
}

template <Matrix (*F)(const Matrix&, const Matrix&)>
void BM_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(F(a, a));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <Matrix (*F)(const Matrix&, const Matrix&, std::span<const double>)>
void BM_affine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, 16, 2);
  const Matrix w = random_matrix(64, 16, 3);
  const std::vector<double> bias(64, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(F(x, w, bias));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <std::vector<double> (*F)(const Matrix&, const Matrix&, std::span<int>)>
void BM_nearest_centroid(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix p = random_matrix(n, 32, 4);
  const Matrix c = random_matrix(10, 32, 5);
  std::vector<int> labels(n);
  for (auto _ : state) benchmark::DoNotOptimize(F(p, c, labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <std::vector<double> (*F)(const Matrix&, std::span<const int>, int)>
void BM_silhouette(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix p = random_matrix(n, 32, 6);
  const auto labels = cyclic_labels(n, 10);
  for (auto _ : state) benchmark::DoNotOptimize(F(p, labels, 10));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_gram<kernels::serial::gram>)->Name("gram/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_gram<kernels::parallel::gram>)->Name("gram/parallel")->Arg(256)->Arg(1024);
BENCHMARK(BM_affine<kernels::serial::affine>)->Name("affine/serial")->Arg(256)->Arg(2000);
BENCHMARK(BM_affine<kernels::parallel::affine>)->Name("affine/parallel")->Arg(256)->Arg(2000);
BENCHMARK(BM_nearest_centroid<kernels::serial::nearest_centroid>)->Name("nearest_centroid/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_nearest_centroid<kernels::parallel::nearest_centroid>)->Name("nearest_centroid/parallel")->Arg(2000)->Arg(20000);
BENCHMARK(BM_silhouette<kernels::serial::silhouette_values>)->Name("silhouette/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_silhouette<kernels::parallel::silhouette_values>)->Name("silhouette/parallel")->Arg(500)->Arg(2000);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "cibhash/retrieval.hpp"

using namespace cibhash;

namespace {

PackedCodes random_codes(std::size_t n, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PackedCodes c(n, bits);
  for (std::size_t i = 0; i < n; ++i)
    for (auto& w : c.row(i)) w = rng();
  return c;
}

void BM_Topk(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto bits = static_cast<std::size_t>(state.range(1));
  const PackedCodes db = random_codes(n, bits, 1);
  const PackedCodes q = random_codes(1, bits, 2);
  for (auto _ : state) benchmark::DoNotOptimize(topk(db, q.row(0), 100));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Topk)->Args({100000, 64})->Args({1000000, 64})->Args({1000000, 128})->Unit(benchmark::kMillisecond);

void BM_HammingScan(benchmark::State& state) {
  const PackedCodes db = random_codes(1000000, 64, 1);
  const PackedCodes q = random_codes(1, 64, 2);
  for (auto _ : state) {
    std::size_t sum = 0;
    for (std::size_t i = 0; i < db.size(); ++i) sum += hamming(db.row(i), q.row(0));
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * 1000000);
}
BENCHMARK(BM_HammingScan)->Unit(benchmark::kMillisecond);

void BM_TopkBatch(benchmark::State& state) {
  const PackedCodes db = random_codes(100000, 64, 1);
  const PackedCodes q = random_codes(64, 64, 2);
  const auto threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(topk_batch(db, q, 100, threads));
}
BENCHMARK(BM_TopkBatch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "cibhash/trainer.hpp"

using namespace cibhash;

namespace {

void BM_EncodeDataset(benchmark::State& state) {
  const EncoderParams params = init_params(128, TrainConfig{}.hidden, 16, 0);
  MatrixF x = MatrixF::Random(static_cast<Eigen::Index>(state.range(0)), 128);
  for (auto _ : state) benchmark::DoNotOptimize(encode_dataset(params, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeDataset)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

#include <benchmark/benchmark.h>

#include <random>

#include "p3p/baseline.hpp"
#include "p3p/synthetic.hpp"
#include "p3p/tokenizer.hpp"

using namespace p3p;

namespace {

const TokenizerConfig kDesk{1.0 / 32, 32, 4, 32, 128};

void BM_Voxelize(benchmark::State& state) {
    const PointCloud pc = uniform_cube_cloud(static_cast<std::size_t>(state.range(0)), 1);
    const TokenizerConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(voxelize(pc, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Voxelize)->RangeMultiplier(4)->Range(4096, 262144);

void BM_VpsTokenize(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const PointCloud pc = uniform_cube_cloud(static_cast<std::size_t>(state.range(0)), 2);
    const WeightTable w = random_weight_table(kDesk.patch_size, kDesk.embed_dim, rng);
    const PosEmbedParams pos = PosEmbedParams::random(kDesk.posembed_hidden, kDesk.embed_dim, rng);
    for (auto _ : state) benchmark::DoNotOptimize(vps_tokenize(pc, kDesk, w, pos));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VpsTokenize)->RangeMultiplier(4)->Range(4096, 262144)->Unit(benchmark::kMillisecond);

void BM_Fps(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointCloud pc = uniform_cube_cloud(n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(fps(pc, n / 32));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Fps)->RangeMultiplier(2)->Range(2048, 32768)->Unit(benchmark::kMillisecond)->Complexity();

void BM_Knn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PointCloud pc = uniform_cube_cloud(n, 4);
    std::vector<std::size_t> centers;
    for (std::size_t i = 0; i < n; i += 32) centers.push_back(i);
    for (auto _ : state) benchmark::DoNotOptimize(knn_group(pc, centers, 32));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Knn)->RangeMultiplier(2)->Range(2048, 32768)->Unit(benchmark::kMillisecond)->Complexity();

}  // namespace
BENCHMARK_MAIN();

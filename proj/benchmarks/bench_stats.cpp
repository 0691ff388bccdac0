#include <benchmark/benchmark.h>

#include <vector>

#include "retentia/rng.hpp"
#include "retentia/stats.hpp"

using namespace retentia;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t key) {
    auto s = rng::Stream::keyed(2, key, 0, 0);
    std::vector<double> v(n);
    for (auto& x : v) x = s.normal();
    return v;
}

}  // namespace

static void BM_RocAuc(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const auto scores = gaussian(n, 1);
    auto s = rng::Stream::keyed(2, 99, 0, 0);
    std::vector<int> labels(n);
    for (auto& y : labels) y = s.bernoulli(0.3) ? 1 : 0;
    for (auto _ : state) benchmark::DoNotOptimize(stats::roc_auc(scores, labels));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RocAuc)->Arg(10000)->Arg(100000);

static void BM_MutualInformation(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const auto x = gaussian(n, 3);
    const auto y = gaussian(n, 4);
    for (auto _ : state)
        benchmark::DoNotOptimize(stats::mutual_information(x, y));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MutualInformation)->Arg(10000)->Arg(100000);

static void BM_BootstrapCi(benchmark::State& state) {
    const auto data = gaussian(500, 5);
    auto mean_stat = [](std::span<const double> v) { return stats::mean(v); };
    for (auto _ : state)
        benchmark::DoNotOptimize(stats::bootstrap_ci(data, mean_stat, 1000, 0.95, 7));
}
BENCHMARK(BM_BootstrapCi)->Unit(benchmark::kMillisecond);

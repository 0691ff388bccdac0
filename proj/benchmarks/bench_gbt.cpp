#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "retentia/gbt.hpp"
#include "retentia/rng.hpp"

using namespace retentia;

namespace {

struct Data {
    std::vector<double> x;
    std::vector<int> labels;
    std::size_t n;
    std::vector<std::string> schema;
};

Data make_data(std::size_t n, std::size_t p) {
    Data d;
    d.n = n;
    auto s = rng::Stream::keyed(1, n, p, 0);
    for (std::size_t j = 0; j < p; ++j) d.schema.push_back("f" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double v = s.normal();
            d.x.push_back(v);
            if (j < 3) z += 0.5 * v;
        }
        d.labels.push_back(s.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0);
    }
    return d;
}

}  // namespace

static void BM_TrainGbt(benchmark::State& state) {
    const Data d = make_data(static_cast<std::size_t>(state.range(0)), 20);
    gbt::GbtParams params;
    params.n_trees = 20;
    params.max_depth = 3;
    for (auto _ : state) {
        auto model = gbt::train_gbt(d.x, d.n, d.schema, d.labels, params);
        benchmark::DoNotOptimize(model);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainGbt)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_PredictGbt(benchmark::State& state) {
    const Data d = make_data(5000, 20);
    gbt::GbtParams params;
    params.n_trees = 50;
    params.max_depth = 3;
    const auto model = gbt::train_gbt(d.x, d.n, d.schema, d.labels, params);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.predict_proba(
            std::span<const double>(&d.x[(i % d.n) * 20], 20)));
        ++i;
    }
}
BENCHMARK(BM_PredictGbt);

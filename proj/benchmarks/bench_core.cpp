#include <benchmark/benchmark.h>

#include "iirnn/baselines.hpp"
#include "iirnn/corpus.hpp"
#include "iirnn/nets.hpp"
#include "iirnn/numerics.hpp"
#include "iirnn/optim.hpp"
#include "iirnn/synth.hpp"

namespace {

using namespace iirnn;

GruParams bench_gru(std::size_t d, std::size_t h) {
    auto p = make_gru_params<float>(d, h);
    Rng rng(1);
    init_gru_params(p, rng, -0.1, 0.1);
    return p;
}

void BM_GruCellForward(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const auto p = bench_gru(d, d);
    Rng rng(2);
    std::vector<float> x(d), h(d);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : h) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto _ : state) {
        auto out = gru_cell_forward(x, h, p, static_cast<const std::vector<float>*>(nullptr),
                                    static_cast<GruCacheT<float>*>(nullptr));
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GruCellForward)->Arg(50)->Arg(100)->Arg(200);

void BM_GruCellBackward(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const auto p = bench_gru(d, d);
    Rng rng(3);
    std::vector<float> x(d), h(d), up(d);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : h) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : up) v = static_cast<float>(rng.uniform(-1, 1));
    GruCacheT<float> cache;
    gru_cell_forward(x, h, p, static_cast<const std::vector<float>*>(nullptr), &cache);
    auto grads = make_gru_params<float>(d, d);
    std::vector<float> gx, gh;
    for (auto _ : state) {
        gru_cell_backward(up, cache, p, grads, gx, gh);
        benchmark::DoNotOptimize(gx);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GruCellBackward)->Arg(50)->Arg(100);

void BM_SoftmaxCrossEntropy(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(4);
    std::vector<float> logits(n);
    for (auto& v : logits) v = static_cast<float>(rng.uniform(-3, 3));
    for (auto _ : state) {
        auto out = softmax_cross_entropy(logits, 7);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SoftmaxCrossEntropy)->Arg(1000)->Arg(30000);

void BM_SessionLossAndGrads(benchmark::State& state) {
    const int num_items = 1000, d = 50, h = 100;
    auto params = init_model_params(Variant::InterLastHidden, num_items, d, h, 5);
    ReprBuffer buffer;
    buffer.capacity = 15;
    Rng rng(6);
    for (int s = 0; s < 15; ++s) {
        SessionRepr repr;
        repr.session_start = s;
        repr.values.resize(h);
        for (auto& v : repr.values) v = static_cast<float>(rng.uniform(-1, 1));
        buffer.push(std::move(repr));
    }
    std::vector<ItemId> items(static_cast<std::size_t>(state.range(0)));
    for (auto& it : items) it = 1 + static_cast<ItemId>(rng.below(num_items));
    for (auto _ : state) {
        auto res = session_loss_and_grads<float>(buffer, items, params, nullptr);
        benchmark::DoNotOptimize(res.loss);
    }
    state.SetItemsProcessed(state.iterations() * (state.range(0) - 1));
}
BENCHMARK(BM_SessionLossAndGrads)->Arg(5)->Arg(20);

void BM_AdamStep(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    DenseArray p({n}), g({n});
    Rng rng(7);
    for (auto& v : p.data) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : g.data) v = static_cast<float>(rng.uniform(-1, 1));
    auto st = make_adam_state(p, AdamHyper{});
    for (auto _ : state) {
        adam_step("bench", p, g, st);
        benchmark::DoNotOptimize(p.data.data());
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_AdamStep)->Arg(100000)->Arg(1000000);

void BM_PredictNext(benchmark::State& state) {
    const int num_items = static_cast<int>(state.range(0));
    auto params = init_model_params(Variant::IntraOnly, num_items, 50, 100, 8);
    ReprBuffer buffer;
    Rng rng(9);
    std::vector<ItemId> prefix(10);
    for (auto& it : prefix) it = 1 + static_cast<ItemId>(rng.below(num_items));
    for (auto _ : state) {
        auto recs = predict_next(buffer, prefix, 20, params);
        benchmark::DoNotOptimize(recs);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PredictNext)->Arg(1000)->Arg(30000);

void BM_PreprocessPipeline(benchmark::State& state) {
    SynthSpec spec;
    spec.num_users = 100;
    spec.sessions_per_user = 10;
    spec.num_items = 200;
    spec.seed = 11;
    const auto events = generate(spec);
    PreprocessConfig cfg;
    for (auto _ : state) {
        auto result = preprocess(events, cfg);
        benchmark::DoNotOptimize(result.corpus.users.size());
    }
    state.SetItemsProcessed(state.iterations() * events.size());
}
BENCHMARK(BM_PreprocessPipeline);

void BM_CoOccurrenceBuild(benchmark::State& state) {
    SynthSpec spec;
    spec.num_users = 100;
    spec.sessions_per_user = 10;
    spec.num_items = 200;
    spec.seed = 12;
    PreprocessConfig cfg;
    const auto corpus = preprocess(generate(spec), cfg).corpus;
    for (auto _ : state) {
        auto matrix = build_cooccurrence(corpus);
        benchmark::DoNotOptimize(matrix.counts.size());
    }
}
BENCHMARK(BM_CoOccurrenceBuild);

}  // namespace

BENCHMARK_MAIN();

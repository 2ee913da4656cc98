#include <benchmark/benchmark.h>

#include "rolesteer/activations.hpp"
#include "rolesteer/rng.hpp"
#include "rolesteer/sae.hpp"
#include "rolesteer/selection.hpp"
#include "rolesteer/steering.hpp"
#include "rolesteer/synth.hpp"
#include "rolesteer/toylm.hpp"

using namespace rolesteer;

namespace {

Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return m;
}

std::vector<float> random_vector(SplitMix64& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

SaeModel dense_sae(std::size_t d, std::size_t h) {
    SplitMix64 rng(7);
    SaeModel::Weights w;
    w.enc_weight = random_matrix(rng, h, d);
    w.enc_bias.assign(d, -0.1f);
    w.dec_weight = random_matrix(rng, d, h);
    w.dec_bias.assign(h, 0.0f);
    w.source_tag = "bench";
    return SaeModel(std::move(w));
}

void BM_EncodeBatch(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const std::size_t h = 256;
    const auto sae = dense_sae(d, h);
    SplitMix64 rng(1);
    const Matrix x = random_matrix(rng, 64, h);
    for (auto _ : state) benchmark::DoNotOptimize(encode_batch(sae, x));
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_EncodeBatch)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_TopK(benchmark::State& state) {
    SplitMix64 rng(2);
    std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
    for (auto& s : scores) s = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(top_k(scores, 15));
}
BENCHMARK(BM_TopK)->Arg(4096)->Arg(16384)->Arg(131072);

void BM_Apply(benchmark::State& state) {
    SplitMix64 rng(3);
    const auto r = random_vector(rng, static_cast<std::size_t>(state.range(0)));
    const auto s = random_vector(rng, r.size());
    for (auto _ : state) benchmark::DoNotOptimize(apply(r, s, 5.0f));
}
BENCHMARK(BM_Apply)->Arg(2304)->Arg(4096);

void BM_ToyForward(benchmark::State& state) {
    const ToyLm lm(ToyLmConfig{});
    std::vector<int> tokens(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<int>(i % 64);
    for (auto _ : state) benchmark::DoNotOptimize(lm.forward_logits(tokens));
}
BENCHMARK(BM_ToyForward)->Arg(16)->Arg(128)->Unit(benchmark::kMicrosecond);

// Full synthetic select at the largest feature count of the family.
void BM_SynthSelect(benchmark::State& state) {
    SynthSpec spec;
    spec.n_pairs = static_cast<std::size_t>(state.range(1));
    spec.features = static_cast<std::size_t>(state.range(0));
    spec.hidden = spec.features;
    spec.planted = choose_planted(spec.features, 15, 1);
    const auto result = gen_pairs(spec);
    for (auto _ : state) {
        const auto table = mean_latent_table(result.sae, result.pairs);
        const auto stats = compute_feature_stats(table.positive, table.negative, SelectionConfig{});
        benchmark::DoNotOptimize(top_k(stats.score, 15));
    }
}
BENCHMARK(BM_SynthSelect)->Args({4096, 64})->Args({16384, 1000})->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "rolesteer/activations.hpp"
#include "rolesteer/evalharness.hpp"
#include "rolesteer/safetensors.hpp"
#include "rolesteer/sae.hpp"
#include "rolesteer/selection.hpp"
#include "rolesteer/steering.hpp"
#include "rolesteer/synth.hpp"
#include "rolesteer/toylm.hpp"

using namespace rolesteer;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string dir_bytes(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += std::filesystem::relative(f, dir).string() + '\0' + file_bytes(f);
    return all;
}

// Nonnegative matrix with roughly a third of entries zero and some exactly at 0.2.
Matrix latent_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& v : m.data) {
        const auto pick = rng.below(10);
        if (pick < 3) {
            v = 0.0f;
        } else if (pick == 3) {
            v = 0.2f;
        } else {
            v = static_cast<float>(rng.uniform(0.0, 2.0));
        }
    }
    return m;
}

Outcome criterion_1() {
    const auto start = Clock::now();
    SplitMix64 rng(101);
    double worst = 0.0;
    std::size_t recomposition_mismatches = 0;
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng.below(16);
        const std::size_t d = 1 + rng.below(64);
        const Matrix pos = latent_matrix(rng, n, d);
        const Matrix neg = latent_matrix(rng, n, d);
        SelectionConfig cfg;
        cfg.theta = rng.below(2) == 0 ? 0.2f : static_cast<float>(rng.uniform(0.0, 1.0));
        cfg.beta = static_cast<float>(rng.uniform(0.0, 10.0));
        cfg.k = 1 + rng.below(d);

        const auto mu = oracle::mu(pos, neg);
        const auto fp = oracle::freq(pos, cfg.theta);
        const auto fn = oracle::freq(neg, cfg.theta);
        const auto stats = compute_feature_stats(pos, neg, cfg);
        for (std::size_t i = 0; i < d; ++i) {
            const double delta = fp[i] - fn[i];
            const double s = mu[i] + static_cast<double>(cfg.beta) * delta;
            worst = std::max({worst, std::abs(stats.mu[i] - mu[i]), std::abs(stats.freq_pos[i] - fp[i]),
                              std::abs(stats.freq_neg[i] - fn[i]), std::abs(stats.delta[i] - delta),
                              std::abs(stats.score[i] - s)});
            if (stats.score[i] != stats.mu[i] + stats.beta * stats.delta[i]) ++recomposition_mismatches;
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-9 && recomposition_mismatches == 0 && elapsed < 5.0,
            fmt("max abs error %.3g, score recomposition mismatches %zu, %.2f s", worst, recomposition_mismatches,
                elapsed)};
}

Outcome criterion_2() {
    Matrix pos(2, 2), neg(2, 2);
    pos.data = {0.5f, 0.1f, 0.3f, 0.0f};
    neg.data = {0.1f, 0.4f, 0.1f, 0.2f};
    const auto close = [](const std::vector<double>& got, std::initializer_list<double> want) {
        std::size_t i = 0;
        for (double w : want) {
            if (std::abs(got.at(i++) - w) > 1e-6) return false;
        }
        return got.size() == want.size();
    };

    const auto o_mu = oracle::mu(pos, neg);
    const auto o_fp = oracle::freq(pos, 0.2f);
    const auto o_fn = oracle::freq(neg, 0.2f);
    std::vector<double> o_delta = {o_fp[0] - o_fn[0], o_fp[1] - o_fn[1]};
    std::vector<double> o_score = {o_mu[0] + o_delta[0], o_mu[1] + o_delta[1]};
    const bool oracle_ok = close(o_mu, {0.3, -0.25}) && close(o_delta, {1.0, -0.5}) && close(o_score, {1.3, -0.75});

    const auto stats = compute_feature_stats(pos, neg, SelectionConfig{0.2f, 1.0f, 1});
    const bool impl_ok = close(stats.mu, {0.3, -0.25}) && close(stats.freq_pos, {1.0, 0.0}) &&
                         close(stats.freq_neg, {0.0, 0.5}) && close(stats.delta, {1.0, -0.5}) &&
                         close(stats.score, {1.3, -0.75});
    const auto top = top_k(stats.score, 1);
    const bool top_ok = top == std::vector<std::size_t>{0};
    return {oracle_ok && impl_ok && top_ok,
            fmt("oracle %s, implementation s=[%.6g, %.6g], top_1=[%zu]", oracle_ok ? "ok" : "mismatch",
                stats.score[0], stats.score[1], top.empty() ? SIZE_MAX : top[0])};
}

Outcome criterion_3() {
    SplitMix64 rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t h = 1 + rng.below(256);
        const auto r = oracle::random_vector(rng, h, -5.0, 5.0);
        const auto s = oracle::random_vector(rng, h, -5.0, 5.0);
        const auto lambda = static_cast<float>(rng.uniform(0.0, 50.0));
        const auto out = apply(r, s, lambda);
        const double nr = oracle::norm(r);
        worst = std::max(worst, std::abs(oracle::norm(out) - nr) / nr);
    }
    const std::vector<float> r = {3.0f, 0.0f};
    const std::vector<float> s = {2.0f, 1.0f};
    const auto hand = apply(r, s, 1.0f);
    const bool hand_ok = std::abs(hand[0] - 2.94174) <= 1e-4 && std::abs(hand[1] - 0.58835) <= 1e-4;
    return {worst <= 1e-6 && hand_ok,
            fmt("max relative norm error %.3g over 1000 triples, hand case [%.5f, %.5f]", worst, hand[0], hand[1])};
}

Outcome criterion_4() {
    const ToyLm lm(ToyLmConfig{});
    const auto& cfg = lm.config();
    SplitMix64 rng(404);
    std::size_t identical = 0;
    for (int p = 0; p < 20; ++p) {
        const std::size_t len = 1 + rng.below(24);
        std::vector<int> prompt(len);
        for (auto& t : prompt) t = static_cast<int>(rng.below(cfg.vocab_size));
        SteeringVector vec;
        vec.shift = oracle::normal_vector(rng, cfg.hidden_size);
        const Steering steer{&vec, SteeringConfig{0.0f, static_cast<int>(rng.below(cfg.layers)),
                                                  InjectionScope::every_step_last_token, true}};
        const auto plain = generate(lm, prompt, 24);
        const auto hooked = generate(lm, prompt, 24, &steer);
        if (plain.tokens == hooked.tokens && hooked.injections.size() == 24) ++identical;
    }
    return {identical == 20, fmt("%zu/20 prompts token-identical", identical)};
}

Outcome criterion_5() {
    SplitMix64 rng(505);
    const float grid[] = {0.0f, 0.5f, 1.0f, 2.0f, 4.0f, 8.0f, 16.0f};
    std::size_t monotone = 0, tested = 0;
    double worst_drop = 0.0;
    while (tested < 200) {
        const std::size_t h = 2 + rng.below(127);
        const auto r = oracle::normal_vector(rng, h);
        const auto s = oracle::normal_vector(rng, h);
        if (std::abs(oracle::cos(r, s)) > 0.999) continue;
        ++tested;
        double prev = -2.0;
        bool ok = true;
        for (float lambda : grid) {
            const double c = cosine(apply(r, s, lambda), s);
            if (c < prev) {
                ok = false;
                worst_drop = std::max(worst_drop, prev - c);
            }
            prev = c;
        }
        if (ok) ++monotone;
    }
    return {monotone == 200, fmt("%zu/200 pairs non-decreasing, largest drop %.3g", monotone, worst_drop)};
}

struct SeedRun {
    bool exact = false;
    std::vector<double> range_precision;
};

const std::vector<std::pair<std::size_t, std::size_t>> kRanges = {{1, 15}, {6, 20}, {11, 25}, {16, 30}};

SeedRun run_synth_seed(std::uint64_t seed, float sigma) {
    SynthSpec spec;
    spec.n_pairs = 64;
    spec.features = 4096;
    spec.hidden = 4096;
    spec.shift = 1.0f;
    spec.noise_sigma = sigma;
    spec.seed = seed;
    spec.planted = choose_planted(spec.features, 15, seed);
    const auto result = gen_pairs(spec);
    const auto table = mean_latent_table(result.sae, result.pairs);
    const auto stats = compute_feature_stats(table.positive, table.negative, SelectionConfig{0.2f, 3.0f, 15});
    SeedRun run;
    auto top = top_k(stats.score, 15);
    std::sort(top.begin(), top.end());
    run.exact = top == result.ground_truth;
    for (const auto& [a, b] : kRanges) {
        run.range_precision.push_back(recovery_precision(rank_range(stats.score, a, b), result.ground_truth));
    }
    return run;
}

std::vector<SeedRun> g_noisy_runs;

Outcome criterion_6() {
    const auto start = Clock::now();
    std::size_t noisy = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        g_noisy_runs.push_back(run_synth_seed(seed, 0.1f));
        noisy += g_noisy_runs.back().exact ? 1 : 0;
    }
    const double noisy_elapsed = seconds_since(start);
    std::size_t clean = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) clean += run_synth_seed(1000 + seed, 0.0f).exact ? 1 : 0;
    return {noisy >= 99 && clean == 100 && noisy_elapsed < 60.0,
            fmt("sigma=0.1 exact in %zu/100 seeds (%.1f s), sigma=0 exact in %zu/100", noisy, noisy_elapsed, clean)};
}

Outcome criterion_7() {
    std::vector<double> mean(kRanges.size(), 0.0);
    const std::size_t seeds = std::min<std::size_t>(50, g_noisy_runs.size());
    for (std::size_t s = 0; s < seeds; ++s) {
        for (std::size_t r = 0; r < kRanges.size(); ++r) mean[r] += g_noisy_runs[s].range_precision[r] / seeds;
    }
    const bool monotone = seeds == 50 && std::is_sorted(mean.begin(), mean.end(), std::greater<>());
    return {monotone, fmt("mean precision over %zu seeds: %.3f / %.3f / %.3f / %.3f", seeds, mean[0], mean[1],
                          mean[2], mean[3])};
}

Outcome criterion_8() {
    std::ifstream in(std::string(ROLESTEER_TEST_DATA) + "/role_variance_table.json");
    if (!in) return {false, "role_variance_table.json missing"};
    const auto table = nlohmann::json::parse(in);
    std::size_t rows = 0, matched = 0;
    double worst = 0.0;
    for (const auto& row : table["rows"]) {
        ++rows;
        const auto stats = prompt_variance(row["accuracies"].get<std::vector<double>>());
        const double err = std::max(std::abs(stats.mean - row["mean"].get<double>()),
                                    std::abs(stats.stddev - row["std"].get<double>()));
        worst = std::max(worst, err);
        if (err <= 0.01) ++matched;
    }
    return {rows == 27 && matched == 27, fmt("%zu/%zu rows within 0.01 (max error %.4f)", matched, rows, worst)};
}

Outcome criterion_9() {
    std::size_t exemplars = 0, exemplar_ok = 0;
    for (auto domain : {ReasoningDomain::arithmetic, ReasoningDomain::commonsense}) {
        const AnswerKind kind = domain == ReasoningDomain::arithmetic ? AnswerKind::numeric : AnswerKind::option;
        for (auto set : {one_shot_exemplars(domain), few_shot_exemplars(domain)}) {
            for (const auto& ex : set) {
                ++exemplars;
                std::string gold(ex.output);
                if (kind == AnswerKind::option) gold = std::string(1, static_cast<char>(std::tolower(gold.at(1))));
                const std::string text = "A: " + std::string(ex.answer) + "\nOutput: " + std::string(ex.output);
                const EvalItem item{std::string(ex.question), gold, kind};
                if (answer_matches(item, extract_answer(text, kind))) ++exemplar_ok;
            }
        }
    }
    std::ifstream in(std::string(ROLESTEER_TEST_DATA) + "/zero_shot_corpus.jsonl");
    std::size_t cases = 0, corpus_ok = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto kind = parse_answer_kind(j["kind"].get<std::string>());
        const auto got = extract_answer(j["output"].get<std::string>(), kind, ExtractMode::zero_shot);
        ++cases;
        const bool ok = j["answer"].is_null() ? !got.has_value()
                                              : answer_matches(EvalItem{"", j["answer"].get<std::string>(), kind}, got);
        corpus_ok += ok ? 1 : 0;
    }
    return {exemplars > 0 && exemplar_ok == exemplars && cases == 50 && corpus_ok == 50,
            fmt("exemplars %zu/%zu, zero-shot corpus %zu/%zu", exemplar_ok, exemplars, corpus_ok, cases)};
}

Outcome criterion_10() {
    oracle::TempDir dir("acceptance");
    SplitMix64 rng(1010);
    std::size_t ok = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const auto base = dir.path() / std::to_string(inst);
        const std::size_t h = 1 + rng.below(48);
        const std::size_t d = 1 + rng.below(96);

        const auto pairs = oracle::random_pairs(rng.next(), 1 + rng.below(12), h);
        write_dump(pairs, base / "dump");
        const auto pairs_back = read_dump(base / "dump");
        write_dump(pairs_back, base / "dump2");
        const bool dump_ok = pairs_back == pairs && dir_bytes(base / "dump") == dir_bytes(base / "dump2");

        const auto act = rng.below(2) == 0 ? SaeActivation::relu : SaeActivation::jumprelu;
        const auto sae = oracle::random_sae(rng.next(), d, h, act);
        save_sae(sae, base / "sae");
        const auto sae_back = load_sae(base / "sae");
        save_sae(sae_back, base / "sae2");
        const bool sae_ok = sae_back == sae && dir_bytes(base / "sae") == dir_bytes(base / "sae2");

        SteeringVector vec;
        vec.shift = oracle::normal_vector(rng, h);
        const std::size_t k = 1 + rng.below(d);
        for (std::size_t i = 0; i < k; ++i) {
            vec.indices.push_back(rng.below(d));
            vec.alpha.push_back(rng.uniform(0.0, 3.0));
        }
        vec.layer = static_cast<int>(rng.below(40));
        vec.default_strength = static_cast<float>(rng.uniform(0.0, 30.0));
        vec.sae_tag = "tag-" + std::to_string(inst);
        save_vector(vec, base / "vec");
        const auto vec_back = load_vector(base / "vec");
        save_vector(vec_back, base / "vec2");
        const bool vec_ok = vec_back == vec && dir_bytes(base / "vec") == dir_bytes(base / "vec2");

        if (dump_ok && sae_ok && vec_ok) ++ok;
    }
    return {ok == 20, fmt("%zu/20 instances round-trip exactly", ok)};
}

// Integer-valued weights and inputs make every pre-activation exact, so a
// threshold can be placed exactly on it.
Outcome criterion_11() {
    SplitMix64 rng(1111);
    std::size_t at_threshold = 0, at_threshold_zero = 0, above = 0, above_kept = 0, oracle_mismatch = 0;
    for (int fixture = 0; fixture < 200; ++fixture) {
        const std::size_t h = 1 + rng.below(16);
        const std::size_t d = 1 + rng.below(32);
        SaeModel::Weights w;
        w.enc_weight = Matrix(h, d);
        for (auto& v : w.enc_weight.data) v = static_cast<float>(static_cast<int>(rng.below(7)) - 3);
        w.enc_bias.resize(d);
        for (auto& v : w.enc_bias) v = static_cast<float>(static_cast<int>(rng.below(5)) - 2);
        w.dec_weight = oracle::random_matrix(rng, d, h, -1.0, 1.0);
        w.dec_bias.assign(h, 0.0f);
        std::vector<float> x(h);
        for (auto& v : x) v = static_cast<float>(static_cast<int>(rng.below(9)) - 4);
        std::vector<double> pre(d);
        for (std::size_t i = 0; i < d; ++i) {
            double p = w.enc_bias[i];
            for (std::size_t j = 0; j < h; ++j) p += static_cast<double>(x[j]) * w.enc_weight(j, i);
            pre[i] = p;
        }
        // Half the features sit exactly on their threshold, the rest one unit below it.
        std::vector<bool> on(d);
        w.jump_threshold = std::vector<float>(d);
        for (std::size_t i = 0; i < d; ++i) {
            on[i] = rng.below(2) == 0;
            (*w.jump_threshold)[i] = static_cast<float>(on[i] ? pre[i] : pre[i] - 1.0);
        }
        w.activation = SaeActivation::jumprelu;
        const SaeModel sae(std::move(w));
        const auto got = encode(sae, x);
        const auto want = oracle::encode(sae, x);
        for (std::size_t i = 0; i < d; ++i) {
            if (static_cast<double>(got[i]) != want[i]) ++oracle_mismatch;
            if (on[i]) {
                ++at_threshold;
                if (got[i] == 0.0f) ++at_threshold_zero;
            } else {
                ++above;
                if (static_cast<double>(got[i]) == pre[i]) ++above_kept;
            }
        }
    }
    return {at_threshold > 0 && at_threshold_zero == at_threshold && above_kept == above && oracle_mismatch == 0,
            fmt("p == tau gives 0 for %zu/%zu features, p > tau passes %zu/%zu, oracle mismatches %zu",
                at_threshold_zero, at_threshold, above_kept, above, oracle_mismatch)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"statistics match the naive reference on 200 random instances", criterion_1},
        {"hand-worked two-feature case", criterion_2},
        {"steering preserves the residual norm", criterion_3},
        {"zero strength leaves generation unchanged", criterion_4},
        {"alignment with the shift grows with strength", criterion_5},
        {"planted features are recovered at d=4096", criterion_6},
        {"recovery precision declines down the ranking", criterion_7},
        {"prompt variance reproduces the 27-row table", criterion_8},
        {"answer extraction fixtures", criterion_9},
        {"dump, SAE and vector files round-trip", criterion_10},
        {"JumpReLU zeroes activations at the threshold", criterion_11},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.pass) ++failures;
        std::printf("%s criterion %zu: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

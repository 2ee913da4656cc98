#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "rolesteer/error.hpp"
#include "rolesteer/toylm.hpp"

using namespace rolesteer;

namespace {

nlohmann::json load_fixture(const char* name) {
    std::ifstream in(std::string(ROLESTEER_TEST_DATA) + "/" + name);
    EXPECT_TRUE(in) << name;
    return nlohmann::json::parse(in);
}

const ToyLm& default_lm() {
    static const ToyLm lm{ToyLmConfig{}};
    return lm;
}

}  // namespace

TEST(ToyLmInit, SameSeedSameHash) {
    ToyLmConfig cfg;
    EXPECT_EQ(ToyLm(cfg).parameter_hash(), ToyLm(cfg).parameter_hash());
    cfg.seed = 43;
    EXPECT_NE(ToyLm(cfg).parameter_hash(), default_lm().parameter_hash());
}

TEST(ToyLmInit, GoldenLogits) {
    const auto golden = load_fixture("toylm_logits_seed42.json");
    ASSERT_EQ(golden["seed"], 42);
    const auto tokens = golden["tokens"].get<std::vector<int>>();
    const auto logits = default_lm().forward_logits(tokens);
    ASSERT_EQ(logits.rows, tokens.size());
    for (std::size_t t = 0; t < logits.rows; ++t) {
        const auto want = golden["logits"][t].get<std::vector<float>>();
        ASSERT_EQ(want.size(), logits.cols);
        for (std::size_t v = 0; v < want.size(); ++v) EXPECT_NEAR(logits(t, v), want[v], 1e-5);
    }
}

TEST(ToyLmInit, ConfigValidation) {
    EXPECT_THROW(ToyLm(ToyLmConfig{64, 30, 4, 4, 128, 1}), UsageError);
    EXPECT_THROW(ToyLm(ToyLmConfig{64, 32, 0, 2, 128, 1}), UsageError);
}

TEST(ToyLmForward, ShapeAndDeterminism) {
    const auto& lm = default_lm();
    const std::vector<int> one = {5};
    const auto cap = lm.forward_capture(one, 2);
    EXPECT_EQ(cap.rows, 1u);
    EXPECT_EQ(cap.cols, 32u);
    const std::vector<int> toks = {3, 1, 4, 1, 5, 9, 2, 6};
    EXPECT_EQ(lm.forward_capture(toks, 1), lm.forward_capture(toks, 1));
    EXPECT_EQ(lm.forward_logits(toks), lm.forward_logits(toks));
}

TEST(ToyLmForward, SplitForwardConsistency) {
    const auto& lm = default_lm();
    const std::vector<int> toks = {7, 8, 9, 10, 11};
    const auto full = lm.forward_logits(toks);
    for (std::size_t l = 0; l < 4; ++l) {
        const auto resumed = lm.resume_from(lm.forward_capture(toks, l), l);
        for (std::size_t i = 0; i < full.data.size(); ++i) EXPECT_NEAR(resumed.data[i], full.data[i], 1e-5);
    }
}

TEST(ToyLmForward, InvalidInputs) {
    const auto& lm = default_lm();
    EXPECT_THROW(lm.forward_logits(std::vector<int>{}), UsageError);
    EXPECT_THROW(lm.forward_logits(std::vector<int>{64}), UsageError);
    EXPECT_THROW(lm.forward_logits(std::vector<int>{-1}), UsageError);
    EXPECT_THROW(lm.forward_logits(std::vector<int>(129, 0)), UsageError);
    EXPECT_THROW(lm.forward_capture(std::vector<int>{1}, 4), UsageError);
}

TEST(ToyLmHook, PrefillInjectionIsExactlyOneApply) {
    const auto& lm = default_lm();
    SplitMix64 rng(1);
    const auto shift = oracle::normal_vector(rng, 32);
    const std::vector<int> toks = {2, 4, 6, 8};
    for (std::size_t layer = 0; layer < 4; ++layer) {
        Injection inj;
        inj.layer = layer;
        inj.shift = shift;
        inj.strength = 3.0f;
        inj.first_position = toks.size() - 1;
        inj.end_position = toks.size();
        std::vector<InjectionEvent> events;
        const auto steered = lm.forward_capture(toks, layer, &inj, &events);
        ASSERT_EQ(events.size(), 1u);
        EXPECT_EQ(events[0].position, 3u);
        auto manual = lm.forward_capture(toks, layer);
        apply_in_place(manual.row(3), shift, 3.0f);
        EXPECT_EQ(steered, manual);
        const auto plain = lm.forward_capture(toks, layer);
        EXPECT_NEAR(l2_norm(steered.row(3)), l2_norm(plain.row(3)), 1e-5 * l2_norm(plain.row(3)));
        EXPECT_NEAR(events[0].cos_with_shift, cosine(steered.row(3), shift), 1e-12);
        EXPECT_NEAR(events[0].norm_before, events[0].norm_after, 1e-5 * events[0].norm_before);
    }
}

TEST(ToyLmHook, LaterLayersSeeTheEdit) {
    const auto& lm = default_lm();
    SplitMix64 rng(2);
    const auto shift = oracle::normal_vector(rng, 32);
    const std::vector<int> toks = {2, 4, 6};
    Injection inj;
    inj.layer = 1;
    inj.shift = shift;
    inj.strength = 8.0f;
    inj.first_position = 2;
    const auto steered = lm.forward_capture(toks, 3, &inj);
    auto manual = lm.forward_capture(toks, 1);
    apply_in_place(manual.row(2), shift, 8.0f);
    for (std::size_t l = 2; l < 4; ++l) lm.run_block(l, manual);
    EXPECT_EQ(steered, manual);
    // Earlier positions are untouched by a causal model.
    const auto plain = lm.forward_capture(toks, 3);
    for (std::size_t t = 0; t < 2; ++t) {
        EXPECT_TRUE(std::equal(plain.row(t).begin(), plain.row(t).end(), steered.row(t).begin()));
    }
}

TEST(Generate, ZeroStrengthMatchesUnsteered) {
    const auto& lm = default_lm();
    SplitMix64 rng(3);
    SteeringVector vec;
    vec.shift = oracle::normal_vector(rng, 32);
    for (int p = 0; p < 5; ++p) {
        std::vector<int> prompt;
        for (int i = 0; i < 1 + p; ++i) prompt.push_back(static_cast<int>(rng.below(64)));
        const auto base = generate(lm, prompt, 12);
        const Steering steer{&vec, SteeringConfig{0.0f, 2}};
        const auto out = generate(lm, prompt, 12, &steer);
        EXPECT_EQ(out.tokens, base.tokens);
        EXPECT_EQ(out.injections.size(), 12u);
    }
}

TEST(Generate, MaxNewZeroReturnsPrompt) {
    const std::vector<int> prompt = {9, 8, 7};
    const auto out = generate(default_lm(), prompt, 0);
    EXPECT_EQ(out.tokens, prompt);
    EXPECT_TRUE(out.injections.empty());
}

TEST(Generate, GoldenSteeredRuns) {
    const auto golden = load_fixture("generation_golden.json");
    const auto& lm = default_lm();
    SplitMix64 rng(golden["shift_seed"].get<std::uint64_t>());
    SteeringVector vec;
    vec.shift.resize(32);
    for (auto& v : vec.shift) v = static_cast<float>(rng.normal());
    const auto prompt = golden["prompt"].get<std::vector<int>>();
    const auto max_new = golden["max_new"].get<std::size_t>();
    const auto base = generate(lm, prompt, max_new);
    EXPECT_EQ(base.tokens, golden["unsteered"].get<std::vector<int>>());
    bool any_diverged = false;
    for (const auto& run : golden["runs"]) {
        const float lambda = run["lambda"].get<float>();
        const Steering steer{&vec, SteeringConfig{lambda, golden["layer"].get<int>()}};
        const auto out = generate(lm, prompt, max_new, &steer);
        EXPECT_EQ(out.tokens, run["tokens"].get<std::vector<int>>()) << "lambda " << lambda;
        if (lambda == 0.0f) EXPECT_EQ(out.tokens, base.tokens);
        if (lambda > 0.0f && !run["divergence_step"].is_null()) any_diverged = true;
    }
    EXPECT_TRUE(any_diverged);
}

TEST(Generate, EachTokenIsArgmaxOfItsSteeredPass) {
    const auto& lm = default_lm();
    SplitMix64 rng(4);
    SteeringVector vec;
    vec.shift = oracle::normal_vector(rng, 32);
    const std::vector<int> prompt = {1, 2, 3};
    const Steering steer{&vec, SteeringConfig{6.0f, 1}};
    const auto out = generate(lm, prompt, 6, &steer);
    for (std::size_t len = prompt.size(); len < out.tokens.size(); ++len) {
        const std::vector<int> prefix(out.tokens.begin(), out.tokens.begin() + static_cast<std::ptrdiff_t>(len));
        Injection inj;
        inj.layer = 1;
        inj.shift = vec.shift;
        inj.strength = 6.0f;
        inj.first_position = prompt.size() - 1;
        const auto logits = lm.forward_logits(prefix, &inj);
        const auto last = logits.row(len - 1);
        EXPECT_EQ(std::max_element(last.begin(), last.end()) - last.begin(), out.tokens[len]);
    }
}

TEST(Generate, PrefillOnlyInjectsOnce) {
    const auto& lm = default_lm();
    SplitMix64 rng(5);
    SteeringVector vec;
    vec.shift = oracle::normal_vector(rng, 32);
    const Steering steer{&vec, SteeringConfig{6.0f, 1, InjectionScope::prefill_only}};
    const auto out = generate(lm, std::vector<int>{1, 2, 3}, 5, &steer);
    ASSERT_EQ(out.injections.size(), 1u);
    EXPECT_EQ(out.injections[0].position, 2u);
}

TEST(Generate, Errors) {
    const auto& lm = default_lm();
    EXPECT_THROW(generate(lm, std::vector<int>{}, 3), UsageError);
    EXPECT_THROW(generate(lm, std::vector<int>(120, 1), 9), UsageError);
    SteeringVector wrong;
    wrong.shift.assign(16, 1.0f);
    const Steering steer{&wrong, SteeringConfig{1.0f, 0}};
    EXPECT_THROW(generate(lm, std::vector<int>{1}, 1, &steer), UsageError);
}

TEST(ToyLmFiles, SaveLoadRoundTrip) {
    oracle::TempDir dir("toylm");
    const ToyLm lm(ToyLmConfig{32, 16, 2, 2, 24, 7});
    save_toy_lm(lm, dir.path());
    const auto loaded = load_toy_lm(dir.path());
    EXPECT_EQ(loaded.config(), lm.config());
    EXPECT_EQ(loaded.parameter_hash(), lm.parameter_hash());
    EXPECT_EQ(loaded.parameters(), lm.parameters());
}

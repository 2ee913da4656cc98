#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rolesteer/error.hpp"
#include "rolesteer/selection.hpp"

using namespace rolesteer;

namespace {

Matrix from_rows(std::vector<std::vector<float>> rows) {
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    return m;
}

const Matrix kPos = from_rows({{0.5f, 0.1f}, {0.3f, 0.0f}});
const Matrix kNeg = from_rows({{0.1f, 0.4f}, {0.1f, 0.2f}});

std::vector<double> random_scores(SplitMix64& rng, std::size_t d, bool with_ties) {
    std::vector<double> s(d);
    for (auto& v : s) v = with_ties ? static_cast<double>(rng.below(10)) : rng.uniform(-5, 5);
    return s;
}

}  // namespace

TEST(Mu, IdenticalPairsGiveZero) {
    SplitMix64 rng(1);
    const auto a = oracle::random_matrix(rng, 4, 6, 0, 1);
    EXPECT_EQ(compute_mu(a, a), std::vector<double>(6, 0.0));
}

TEST(Mu, HandExample) {
    const auto mu = compute_mu(kPos, kNeg);
    EXPECT_NEAR(mu[0], 0.3, 1e-7);
    EXPECT_NEAR(mu[1], -0.25, 1e-7);
}

TEST(Mu, MatchesNaiveOracle) {
    SplitMix64 rng(2);
    const auto pos = oracle::random_matrix(rng, 16, 64, 0, 2);
    const auto neg = oracle::random_matrix(rng, 16, 64, 0, 2);
    const auto got = compute_mu(pos, neg);
    const auto want = oracle::mu(pos, neg);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
}

TEST(Mu, ShapeMismatch) {
    EXPECT_THROW(compute_mu(Matrix(2, 3), Matrix(2, 4)), UsageError);
    EXPECT_THROW(compute_mu(Matrix(0, 3), Matrix(0, 3)), UsageError);
}

TEST(Frequency, LargeThresholdGivesZero) {
    const auto f = compute_freq_delta(kPos, kNeg, 10.0f);
    EXPECT_EQ(f.freq_pos, std::vector<double>(2, 0.0));
    EXPECT_EQ(f.freq_neg, std::vector<double>(2, 0.0));
    EXPECT_EQ(f.delta, std::vector<double>(2, 0.0));
}

TEST(Frequency, HandExampleIsStrict) {
    const auto f = compute_freq_delta(kPos, kNeg, 0.2f);
    EXPECT_EQ(f.freq_pos, (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(f.freq_neg, (std::vector<double>{0.0, 0.5}));  // 0.2 > 0.2 is false
    EXPECT_EQ(f.delta, (std::vector<double>{1.0, -0.5}));
}

TEST(Frequency, MatchesNaiveOracleExactlyAndIsBounded) {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pos = oracle::random_matrix(rng, 9, 30, 0, 0.5);
        const auto neg = oracle::random_matrix(rng, 9, 30, 0, 0.5);
        const auto f = compute_freq_delta(pos, neg, 0.2f);
        const auto fp = oracle::freq(pos, 0.2f);
        const auto fn = oracle::freq(neg, 0.2f);
        EXPECT_EQ(f.freq_pos, fp);
        EXPECT_EQ(f.freq_neg, fn);
        for (std::size_t i = 0; i < 30; ++i) {
            EXPECT_EQ(f.delta[i], fp[i] - fn[i]);
            EXPECT_GE(f.delta[i], -1.0);
            EXPECT_LE(f.delta[i], 1.0);
        }
    }
}

TEST(Sensitivity, ZeroBetaIsMu) {
    const std::vector<double> mu = {0.3, -0.25, 1.0};
    const std::vector<double> delta = {1.0, -0.5, 0.0};
    EXPECT_EQ(sensitivity(mu, delta, 0.0), mu);
}

TEST(Sensitivity, HandExample) {
    const auto s = sensitivity(std::vector<double>{0.3, -0.25}, std::vector<double>{1.0, -0.5}, 1.0);
    EXPECT_NEAR(s[0], 1.3, 1e-12);
    EXPECT_NEAR(s[1], -0.75, 1e-12);
}

TEST(Sensitivity, RecomposesFeatureStatsExactly) {
    SplitMix64 rng(4);
    const auto pos = oracle::random_matrix(rng, 12, 40, 0, 1);
    const auto neg = oracle::random_matrix(rng, 12, 40, 0, 1);
    const SelectionConfig cfg{0.3f, 2.5f, 5};
    const auto stats = compute_feature_stats(pos, neg, cfg);
    EXPECT_EQ(sensitivity(compute_mu(pos, neg), stats.delta, cfg.beta), stats.score);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(stats.score[i], stats.mu[i] + 2.5 * stats.delta[i]);
}

TEST(TopK, HandExample) { EXPECT_EQ(top_k(std::vector<double>{1.3, -0.75}, 1), (std::vector<std::size_t>{0})); }

TEST(TopK, TiesBreakByIndex) {
    EXPECT_EQ(top_k(std::vector<double>(5, 0.7), 3), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(TopK, MatchesFullSortOracle) {
    SplitMix64 rng(5);
    for (bool ties : {false, true}) {
        const auto s = random_scores(rng, 1000, ties);
        const auto want = oracle::ranking(s);
        for (std::size_t k : {1u, 15u, 999u, 1000u}) {
            EXPECT_EQ(top_k(s, k), std::vector<std::size_t>(want.begin(), want.begin() + k));
        }
    }
}

TEST(TopK, InvalidInputs) {
    EXPECT_THROW(top_k(std::vector<double>{1, 2}, 3), UsageError);
    EXPECT_THROW(top_k(std::vector<double>{1, std::nan("")}, 1), NumericalError);
    EXPECT_THROW(top_k(std::vector<double>{1, 2}, 0), UsageError);
}

TEST(RankRange, DefinitionAndWindows) {
    SplitMix64 rng(6);
    const auto s = random_scores(rng, 100, false);
    const auto full = oracle::ranking(s);
    EXPECT_EQ(rank_range(s, 1, 15), top_k(s, 15));
    EXPECT_EQ(rank_range(s, 7, 7), (std::vector<std::size_t>{full[6]}));
    for (auto [a, b] : {std::pair{1u, 15u}, {6u, 20u}, {11u, 25u}, {16u, 30u}}) {
        EXPECT_EQ(rank_range(s, a, b), std::vector<std::size_t>(full.begin() + (a - 1), full.begin() + b));
    }
}

TEST(RankRange, InvalidBounds) {
    const std::vector<double> s(10, 1.0);
    EXPECT_THROW(rank_range(s, 0, 3), UsageError);
    EXPECT_THROW(rank_range(s, 4, 3), UsageError);
    EXPECT_THROW(rank_range(s, 5, 11), UsageError);
}

TEST(Ranking, ShiftInvariance) {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto s = random_scores(rng, 50, trial % 2 == 0);
        const auto before = top_k(s, 10);
        const auto window = rank_range(s, 6, 20);
        for (auto& v : s) v += 17.0;
        EXPECT_EQ(top_k(s, 10), before);
        EXPECT_EQ(rank_range(s, 6, 20), window);
    }
}

TEST(Ranking, RaisingOneScoreNeverLowersItsRank) {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_scores(rng, 40, true);
        const std::size_t f = rng.below(40);
        auto rank_of = [&](const std::vector<double>& sc) {
            const auto order = top_k(sc, sc.size());
            return std::find(order.begin(), order.end(), f) - order.begin();
        };
        const auto before = rank_of(s);
        s[f] += rng.uniform(0, 3);
        EXPECT_LE(rank_of(s), before);
    }
}

TEST(Alpha, SingletonAndHandExample) {
    SplitMix64 rng(9);
    const auto one = oracle::random_matrix(rng, 1, 8, 0, 1);
    const std::vector<std::size_t> idx = {5, 2};
    EXPECT_EQ(compute_alpha(one, idx), (std::vector<double>{one(0, 5), one(0, 2)}));
    EXPECT_NEAR(compute_alpha(kPos, std::vector<std::size_t>{0})[0], 0.4, 1e-7);
}

TEST(Alpha, MatchesColumnMeanOracle) {
    SplitMix64 rng(10);
    const auto pos = oracle::random_matrix(rng, 16, 64, 0, 3);
    const std::vector<std::size_t> idx = {63, 0, 17, 4};
    const auto got = compute_alpha(pos, idx);
    const auto want = oracle::column_mean(pos, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
    EXPECT_THROW(compute_alpha(pos, std::vector<std::size_t>{64}), UsageError);
}

TEST(Selection, ReportIsRankOrdered) {
    const SelectionConfig cfg{0.2f, 1.0f, 2};
    const auto stats = compute_feature_stats(kPos, kNeg, cfg);
    const auto sel = select_features(kPos, stats, 2);
    EXPECT_EQ(sel.indices, (std::vector<std::size_t>{0, 1}));
    const auto report = selection_report(cfg, stats, sel);
    EXPECT_EQ(report["theta"].get<double>(), 0.2);
    EXPECT_EQ(report["k"], 2);
    ASSERT_EQ(report["features"].size(), 2u);
    EXPECT_EQ(report["features"][0]["rank"], 1);
    EXPECT_EQ(report["features"][0]["id"], 0);
    EXPECT_NEAR(report["features"][0]["score"].get<double>(), 1.3, 1e-7);
    EXPECT_NEAR(report["features"][1]["score"].get<double>(), -0.75, 1e-7);
}

TEST(Selection, ConfigValidation) {
    EXPECT_THROW((SelectionConfig{0.2f, 3.0f, 0}.validate()), UsageError);
    EXPECT_THROW((SelectionConfig{std::nanf(""), 3.0f, 15}.validate()), UsageError);
    EXPECT_THROW((SelectionConfig{-0.1f, 3.0f, 15}.validate()), UsageError);
    EXPECT_THROW((SelectionConfig{0.2f, INFINITY, 15}.validate()), UsageError);
    EXPECT_NO_THROW(SelectionConfig{}.validate());
}

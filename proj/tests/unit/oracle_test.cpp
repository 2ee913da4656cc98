// Checks the reference implementations against hand-computed values before
// they are trusted as oracles elsewhere.
#include <gtest/gtest.h>

#include "oracles.hpp"

using oracle::Matrix;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (float v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

}  // namespace

TEST(Oracle, HandStatistics) {
    const Matrix pos = from_rows({{0.5f, 0.1f}, {0.3f, 0.0f}});
    const Matrix neg = from_rows({{0.1f, 0.4f}, {0.1f, 0.2f}});
    const auto m = oracle::mu(pos, neg);
    EXPECT_NEAR(m[0], 0.3, 1e-7);
    EXPECT_NEAR(m[1], -0.25, 1e-7);
    EXPECT_EQ(oracle::freq(pos, 0.2f), (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(oracle::freq(neg, 0.2f), (std::vector<double>{0.0, 0.5}));
    const std::vector<std::size_t> cols = {1, 0};
    const auto means = oracle::column_mean(pos, cols);
    EXPECT_NEAR(means[0], 0.05, 1e-7);
    EXPECT_NEAR(means[1], 0.4, 1e-7);
}

TEST(Oracle, RankingBreaksTiesByIndex) {
    const std::vector<double> scores = {1.0, 3.0, 1.0, 3.0, -2.0};
    EXPECT_EQ(oracle::ranking(scores), (std::vector<std::size_t>{1, 3, 0, 2, 4}));
}

TEST(Oracle, IdentitySaeEncodeDecode) {
    const auto sae = oracle::identity_sae(3);
    const std::vector<float> x = {1.5f, -2.0f, 0.25f};
    EXPECT_EQ(oracle::encode(sae, x), (std::vector<double>{1.5, 0.0, 0.25}));
    EXPECT_EQ(oracle::decode(sae, x), (std::vector<double>{1.5, -2.0, 0.25}));
}

TEST(Oracle, SteerHandCase) {
    const std::vector<float> r = {3.0f, 4.0f};
    const std::vector<float> s = {1.0f, 0.0f};
    const auto out = oracle::steer(r, s, 3.0);
    // r + 3s = (6, 4), rescaled to norm 5.
    EXPECT_NEAR(out[0], 6.0 * 5.0 / std::sqrt(52.0), 1e-12);
    EXPECT_NEAR(out[1], 4.0 * 5.0 / std::sqrt(52.0), 1e-12);
    EXPECT_NEAR(oracle::norm(r), 5.0, 1e-12);
    EXPECT_NEAR(oracle::cos(r, s), 0.6, 1e-12);
}

TEST(Oracle, PopulationStd) {
    EXPECT_DOUBLE_EQ(oracle::population_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}), 2.0);
}

TEST(Oracle, RandomPairsAreValid) {
    const auto set = oracle::random_pairs(9, 12, 5);
    EXPECT_NO_THROW(rolesteer::validate(set));
    EXPECT_EQ(set, oracle::random_pairs(9, 12, 5));
}

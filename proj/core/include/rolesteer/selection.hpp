#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolesteer/tensor.hpp"

namespace rolesteer {

struct SelectionConfig {
    float theta = 0.2f;  // activation threshold, strict ">"
    float beta = 3.0f;   // weight of the frequency difference in the score
    std::size_t k = 15;

    void validate() const;
};

struct FrequencyStats {
    std::vector<double> freq_pos;
    std::vector<double> freq_neg;
    std::vector<double> delta;
};

// Per-feature statistics. Accumulated and stored in float64.
struct FeatureStats {
    std::vector<double> mu;
    std::vector<double> freq_pos;
    std::vector<double> freq_neg;
    std::vector<double> delta;
    std::vector<double> score;
    double beta = 0.0;
};

struct SelectedFeatures {
    std::vector<std::size_t> indices;  // rank order
    std::vector<double> alpha;         // parallel to indices
};

// mu_i = (1/N) sum_j (pos[j,i] - neg[j,i]).
std::vector<double> compute_mu(const Matrix& pos, const Matrix& neg);

// f_i = (1/N) #{j : a_ij > theta}, for both sides; delta = f_pos - f_neg.
FrequencyStats compute_freq_delta(const Matrix& pos, const Matrix& neg, float theta);

// s_i = mu_i + beta * delta_i.
std::vector<double> sensitivity(std::span<const double> mu, std::span<const double> delta, double beta);

FeatureStats compute_feature_stats(const Matrix& pos, const Matrix& neg, const SelectionConfig& config);

// The k highest scores, ordered by descending score then ascending index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

// Ranks start..end (1-based, inclusive) under the top_k ordering.
std::vector<std::size_t> rank_range(std::span<const double> scores, std::size_t start, std::size_t end);

// alpha_i = column mean of pos at each selected index.
std::vector<double> compute_alpha(const Matrix& pos, std::span<const std::size_t> indices);

SelectedFeatures select_features(const Matrix& pos, const FeatureStats& stats, std::size_t k);

// JSON report sorted by rank.
nlohmann::json selection_report(const SelectionConfig& config, const FeatureStats& stats,
                                 const SelectedFeatures& selected);

}  // namespace rolesteer

#include "rolesteer/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rolesteer/error.hpp"

namespace rolesteer {

namespace {

void check_pair(const Matrix& pos, const Matrix& neg, const char* op) {
    if (pos.rows != neg.rows || pos.cols != neg.cols) {
        throw UsageError(std::string(op) + ": shape mismatch [" + std::to_string(pos.rows) + "x" +
                         std::to_string(pos.cols) + "] vs [" + std::to_string(neg.rows) + "x" +
                         std::to_string(neg.cols) + "]");
    }
    if (pos.rows == 0) throw UsageError(std::string(op) + ": no sample pairs (N = 0)");
}

// Full ranking order: descending score, ascending index on ties.
std::vector<std::size_t> ranking(std::span<const double> scores, std::size_t count) {
    for (double s : scores) {
        if (std::isnan(s)) throw NumericalError("ranking: score vector contains NaN");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), before);
    order.resize(count);
    return order;
}

}  // namespace

void SelectionConfig::validate() const {
    if (!(theta >= 0.0f) || !std::isfinite(theta)) throw UsageError("selection: theta must be finite and >= 0");
    if (!std::isfinite(beta)) throw UsageError("selection: beta must be finite");
    if (k < 1) throw UsageError("selection: k must be >= 1");
}

std::vector<double> compute_mu(const Matrix& pos, const Matrix& neg) {
    check_pair(pos, neg, "compute_mu");
    std::vector<double> sum(pos.cols, 0.0);
    for (std::size_t j = 0; j < pos.rows; ++j) {
        const auto p = pos.row(j);
        const auto n = neg.row(j);
        for (std::size_t i = 0; i < pos.cols; ++i) sum[i] += static_cast<double>(p[i]) - static_cast<double>(n[i]);
    }
    const auto N = static_cast<double>(pos.rows);
    for (auto& v : sum) v /= N;
    return sum;
}

FrequencyStats compute_freq_delta(const Matrix& pos, const Matrix& neg, float theta) {
    check_pair(pos, neg, "compute_freq_delta");
    if (!(theta >= 0.0f)) throw UsageError("compute_freq_delta: theta must be >= 0");
    std::vector<std::size_t> count_pos(pos.cols, 0), count_neg(pos.cols, 0);
    for (std::size_t j = 0; j < pos.rows; ++j) {
        const auto p = pos.row(j);
        const auto n = neg.row(j);
        for (std::size_t i = 0; i < pos.cols; ++i) {
            count_pos[i] += p[i] > theta ? 1 : 0;
            count_neg[i] += n[i] > theta ? 1 : 0;
        }
    }
    const auto N = static_cast<double>(pos.rows);
    FrequencyStats out;
    out.freq_pos.resize(pos.cols);
    out.freq_neg.resize(pos.cols);
    out.delta.resize(pos.cols);
    for (std::size_t i = 0; i < pos.cols; ++i) {
        out.freq_pos[i] = static_cast<double>(count_pos[i]) / N;
        out.freq_neg[i] = static_cast<double>(count_neg[i]) / N;
        out.delta[i] = out.freq_pos[i] - out.freq_neg[i];
    }
    return out;
}

std::vector<double> sensitivity(std::span<const double> mu, std::span<const double> delta, double beta) {
    if (mu.size() != delta.size()) {
        throw UsageError("sensitivity: length mismatch " + std::to_string(mu.size()) + " vs " +
                         std::to_string(delta.size()));
    }
    std::vector<double> s(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) s[i] = mu[i] + beta * delta[i];
    return s;
}

FeatureStats compute_feature_stats(const Matrix& pos, const Matrix& neg, const SelectionConfig& config) {
    config.validate();
    FeatureStats stats;
    stats.mu = compute_mu(pos, neg);
    auto freq = compute_freq_delta(pos, neg, config.theta);
    stats.freq_pos = std::move(freq.freq_pos);
    stats.freq_neg = std::move(freq.freq_neg);
    stats.delta = std::move(freq.delta);
    stats.beta = config.beta;
    stats.score = sensitivity(stats.mu, stats.delta, stats.beta);
    return stats;
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
    if (k < 1 || k > scores.size()) {
        throw UsageError("top_k: k = " + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
    }
    return ranking(scores, k);
}

std::vector<std::size_t> rank_range(std::span<const double> scores, std::size_t start, std::size_t end) {
    if (start < 1 || start > end || end > scores.size()) {
        throw UsageError("rank_range: invalid bounds " + std::to_string(start) + ".." + std::to_string(end) +
                         " for " + std::to_string(scores.size()) + " features");
    }
    auto order = ranking(scores, end);
    return {order.begin() + static_cast<std::ptrdiff_t>(start - 1), order.end()};
}

std::vector<double> compute_alpha(const Matrix& pos, std::span<const std::size_t> indices) {
    if (pos.rows == 0) throw UsageError("compute_alpha: no positive samples");
    for (auto i : indices) {
        if (i >= pos.cols) {
            throw UsageError("compute_alpha: feature " + std::to_string(i) + " out of range [0, " +
                             std::to_string(pos.cols) + ")");
        }
    }
    std::vector<double> alpha(indices.size(), 0.0);
    for (std::size_t j = 0; j < pos.rows; ++j) {
        const auto row = pos.row(j);
        for (std::size_t k = 0; k < indices.size(); ++k) alpha[k] += row[indices[k]];
    }
    for (auto& a : alpha) a /= static_cast<double>(pos.rows);
    return alpha;
}

SelectedFeatures select_features(const Matrix& pos, const FeatureStats& stats, std::size_t k) {
    SelectedFeatures sel;
    sel.indices = top_k(stats.score, k);
    sel.alpha = compute_alpha(pos, sel.indices);
    return sel;
}

nlohmann::json selection_report(const SelectionConfig& config, const FeatureStats& stats,
                                 const SelectedFeatures& selected) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t r = 0; r < selected.indices.size(); ++r) {
        const auto id = selected.indices[r];
        features.push_back({
            {"rank", r + 1},
            {"id", id},
            {"mu", stats.mu[id]},
            {"freq_pos", stats.freq_pos[id]},
            {"freq_neg", stats.freq_neg[id]},
            {"delta", stats.delta[id]},
            {"score", stats.score[id]},
            {"alpha", selected.alpha[r]},
        });
    }
    return {
        {"theta", shortest_double(config.theta)},
        {"beta", shortest_double(config.beta)},
        {"k", config.k},
        {"features", std::move(features)},
    };
}

}  // namespace rolesteer

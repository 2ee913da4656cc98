#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rolesteer/sae.hpp"
#include "rolesteer/tensor.hpp"

namespace rolesteer {

struct TokenMeta {
    std::string text;
    bool is_bos = false;

    friend bool operator==(const TokenMeta&, const TokenMeta&) = default;
};

// Residual stream at one layer for one prompt, one row per token.
struct ActivationRecord {
    std::vector<TokenMeta> tokens;
    Matrix residuals;  // [T x h]
    std::string prompt_text;

    friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;
};

struct ActivationPair {
    std::string id;
    int variant = 0;  // which role prompt variant produced the positive
    ActivationRecord positive;
    ActivationRecord negative;

    friend bool operator==(const ActivationPair&, const ActivationPair&) = default;
};

struct PairSet {
    std::vector<ActivationPair> pairs;
    int layer = 0;
    std::size_t hidden_size = 0;
    std::string model_tag;

    friend bool operator==(const PairSet&, const PairSet&) = default;
};

// Throws DataError naming the pair id on the first violated invariant.
void validate(const PairSet& pairs);

// Version tag of the embedded stopword list.
inline constexpr std::string_view kStopwordListVersion = "en-classic-179/v1";

// The frozen English stopword list (179 entries, lowercase).
std::span<const std::string_view> stopwords();
bool is_stopword(std::string_view lowercase_word);

// True when every non-whitespace code point is Unicode punctuation (P*) or
// symbol (S*). A token with no non-whitespace code point also counts.
bool is_punctuation_token(std::string_view text);

// mask[t] is true when token t takes part in the per-sample mean: not BOS,
// not punctuation, and not a stopword after trimming and lowercasing.
std::vector<bool> token_mask(std::span<const TokenMeta> tokens);

struct SampleMean {
    std::vector<float> latents;   // [d]
    std::size_t used_tokens = 0;  // 0 means the mask was empty and latents are all zero
};

// Mean SAE latent activation over the unmasked tokens of one record.
SampleMean sample_mean_latents(const SaeModel& sae, const ActivationRecord& record);

// Per-sample mean latents for the first `limit` pairs, stacked as [N x d].
// Rows equal sample_mean_latents for the corresponding record; records with
// an empty mask are listed in `empty_mask_records` as "pos:<id>" / "neg:<id>".
struct LatentTable {
    Matrix positive;
    Matrix negative;
    std::vector<std::string> empty_mask_records;
};
LatentTable mean_latent_table(const SaeModel& sae, const PairSet& pairs, std::size_t limit = SIZE_MAX);

void write_dump(const PairSet& pairs, const std::filesystem::path& dir);
PairSet read_dump(const std::filesystem::path& dir);

}  // namespace rolesteer

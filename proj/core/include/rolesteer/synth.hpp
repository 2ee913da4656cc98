#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolesteer/activations.hpp"
#include "rolesteer/sae.hpp"

namespace rolesteer {

enum class SynthSaeMode {
    identity_like,      // W_enc = W_dec = I, requires d == h
    random_orthogonal,  // orthonormal decoder rows, W_enc = W_dec^T, requires d <= h
};

std::string_view to_string(SynthSaeMode mode);
SynthSaeMode parse_synth_sae_mode(std::string_view text);

struct SynthSpec {
    std::size_t n_pairs = 64;
    std::size_t features = 512;  // d
    std::size_t hidden = 512;    // h
    std::vector<std::size_t> planted;
    float shift = 1.0f;         // added to planted latents of positives
    float noise_sigma = 0.1f;   // latent means ~ max(0, N(0, sigma))
    std::uint64_t seed = 0;
    SynthSaeMode sae_mode = SynthSaeMode::identity_like;
    // Activation placed on decoy features by the masked tokens (BOS,
    // stopwords, punctuation) of positive samples. Masking must hide it.
    float decoy_activation = 4.0f;
    std::size_t decoys = 3;

    void validate() const;
};

struct SynthResult {
    PairSet pairs;
    SaeModel sae;
    std::vector<std::size_t> ground_truth;  // sorted planted ids
};

// `count` distinct feature ids in [0, features), sorted, drawn from `seed`.
std::vector<std::size_t> choose_planted(std::size_t features, std::size_t count, std::uint64_t seed);

// Synthetic pair set with a known planted feature set. Latents are generated
// first and turned into residuals through the returned SAE's decoder, so
// encoding a content token recovers its latents.
SynthResult gen_pairs(const SynthSpec& spec);

nlohmann::json ground_truth_json(const SynthSpec& spec, const std::vector<std::size_t>& planted);
std::vector<std::size_t> read_ground_truth(const std::filesystem::path& file);

// Fraction of `selected` that is in `planted`.
double recovery_precision(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& planted);

}  // namespace rolesteer

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rolesteer/tensor.hpp"

namespace rolesteer {

enum class SaeActivation { relu, jumprelu };

std::string_view to_string(SaeActivation activation);
SaeActivation parse_sae_activation(std::string_view text);

// Sparse autoencoder weights. Immutable after construction; every instance
// satisfies the shape, threshold and finiteness invariants.
//
//   enc_weight  [h x d]   enc_bias [d]
//   dec_weight  [d x h]   dec_bias [h]
//   threshold   [d]       (jumprelu only)
class SaeModel {
public:
    struct Weights {
        Matrix enc_weight;
        std::vector<float> enc_bias;
        Matrix dec_weight;
        std::vector<float> dec_bias;
        SaeActivation activation = SaeActivation::relu;
        std::optional<std::vector<float>> jump_threshold;
        std::string source_tag;
        // Some SAE releases encode (x - b_dec) instead of x.
        bool subtract_decoder_bias = false;
    };

    // Throws DataError naming the offending tensor when an invariant fails.
    explicit SaeModel(Weights weights);

    std::size_t feature_count() const noexcept { return w_.enc_bias.size(); }
    std::size_t hidden_size() const noexcept { return w_.dec_bias.size(); }

    const Matrix& enc_weight() const noexcept { return w_.enc_weight; }
    const std::vector<float>& enc_bias() const noexcept { return w_.enc_bias; }
    const Matrix& dec_weight() const noexcept { return w_.dec_weight; }
    const std::vector<float>& dec_bias() const noexcept { return w_.dec_bias; }
    SaeActivation activation() const noexcept { return w_.activation; }
    const std::optional<std::vector<float>>& jump_threshold() const noexcept { return w_.jump_threshold; }
    const std::string& source_tag() const noexcept { return w_.source_tag; }
    bool subtract_decoder_bias() const noexcept { return w_.subtract_decoder_bias; }

    // Row-compressed copy of W_enc, built only when at most 1/8 of its entries are nonzero.
    struct SparseEncoder {
        std::vector<std::size_t> row_start;  // [h + 1]
        std::vector<std::uint32_t> feature;
        std::vector<float> value;
    };
    const std::optional<SparseEncoder>& sparse_encoder() const noexcept { return sparse_; }

    friend bool operator==(const SaeModel& a, const SaeModel& b);

private:
    Weights w_;
    std::optional<SparseEncoder> sparse_;
};

bool operator==(const SaeModel::Weights& a, const SaeModel::Weights& b);

// Bundle directory: sae.safetensors + sae.json.
SaeModel load_sae(const std::filesystem::path& dir);
void save_sae(const SaeModel& sae, const std::filesystem::path& dir);

// Latent activations. Pre-activation p = x * W_enc + b_enc accumulated in
// float64 in ascending hidden index order; relu keeps max(p, 0), jumprelu keeps
// p where p > tau (strict) and writes 0 otherwise.
std::vector<float> encode(const SaeModel& sae, std::span<const float> x);

// Row-wise encode. Row t of the result is bit-identical to encode(sae, X.row(t)).
Matrix encode_batch(const SaeModel& sae, const Matrix& X);

// Reconstruction a * W_dec + b_dec, float64 accumulation.
std::vector<float> decode(const SaeModel& sae, std::span<const float> latents);

// W_dec[i, :] without the decoder bias.
std::vector<float> decoder_row(const SaeModel& sae, std::size_t feature);

}  // namespace rolesteer

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "rolesteer/safetensors.hpp"
#include "rolesteer/steering.hpp"
#include "rolesteer/tensor.hpp"

namespace rolesteer {

struct ToyLmConfig {
    std::size_t vocab_size = 64;
    std::size_t hidden_size = 32;
    std::size_t layers = 4;
    std::size_t heads = 2;
    std::size_t context = 128;
    std::uint64_t seed = 42;

    void validate() const;

    friend bool operator==(const ToyLmConfig&, const ToyLmConfig&) = default;
};

// Residual-stream edit applied right after block `layer`, at positions
// [first_position, end_position).
struct Injection {
    std::size_t layer = 0;
    std::span<const float> shift;
    float strength = 0.0f;
    bool normalize = true;
    std::size_t first_position = 0;
    std::size_t end_position = std::numeric_limits<std::size_t>::max();
};

struct InjectionEvent {
    std::size_t position = 0;
    double norm_before = 0.0;
    double norm_after = 0.0;
    double cos_with_shift = 0.0;  // cos(r_new, s); 0 when s is the zero vector
};

// Pre-norm decoder-only transformer with learned positional embeddings and an
// untied unembedding. Parameters are drawn from SplitMix64(seed) in a fixed
// order; the forward pass accumulates in float32 in a fixed order. Immutable.
class ToyLm {
public:
    struct Block {
        std::vector<float> ln1_gain, ln1_bias;
        Matrix wq, wk, wv, wo;  // [h x h]
        std::vector<float> bq, bk, bv, bo;
        std::vector<float> ln2_gain, ln2_bias;
        Matrix w_up;  // [h x 4h]
        std::vector<float> b_up;
        Matrix w_down;  // [4h x h]
        std::vector<float> b_down;
    };

    explicit ToyLm(const ToyLmConfig& config);

    const ToyLmConfig& config() const noexcept { return config_; }

    // Token + position embeddings, [T x h].
    Matrix embed(std::span<const int> tokens) const;
    void run_block(std::size_t layer, Matrix& residual) const;
    // Final layer norm and unembedding, [T x vocab].
    Matrix logits(const Matrix& residual) const;

    // Residual stream after block `layer` for every position.
    Matrix forward_capture(std::span<const int> tokens, std::size_t layer, const Injection* injection = nullptr,
                           std::vector<InjectionEvent>* events = nullptr) const;
    Matrix forward_logits(std::span<const int> tokens, const Injection* injection = nullptr,
                          std::vector<InjectionEvent>* events = nullptr) const;
    // Runs blocks after `layer` on a captured residual and returns logits.
    Matrix resume_from(Matrix residual, std::size_t layer) const;

    std::uint64_t parameter_hash() const;
    TensorMap parameters() const;
    static ToyLm from_parameters(const ToyLmConfig& config, const TensorMap& tensors);

private:
    ToyLm() = default;
    void check_tokens(std::span<const int> tokens) const;
    void inject(Matrix& residual, const Injection& injection, std::vector<InjectionEvent>* events) const;

    ToyLmConfig config_;
    Matrix tok_emb_;  // [vocab x h]
    Matrix pos_emb_;  // [context x h]
    std::vector<Block> blocks_;
    std::vector<float> lnf_gain_, lnf_bias_;
    Matrix unembed_;  // [h x vocab]
};

inline ToyLm init_toy_lm(const ToyLmConfig& config) { return ToyLm(config); }

void save_toy_lm(const ToyLm& lm, const std::filesystem::path& dir);
ToyLm load_toy_lm(const std::filesystem::path& dir);

struct Steering {
    const SteeringVector* vector = nullptr;
    SteeringConfig config;
};

struct GenerationResult {
    std::vector<int> tokens;  // prompt followed by generated tokens
    std::vector<InjectionEvent> injections;  // one per injected forward pass, at its last position
};

// Greedy decoding (argmax, lowest id on ties). Every forward pass recomputes
// the full sequence; positions that were the last position of an earlier pass
// receive the same injection they received then, which reproduces the
// behaviour of a cached decoder.
GenerationResult generate(const ToyLm& lm, std::span<const int> prompt, std::size_t max_new,
                          const Steering* steer = nullptr);

}  // namespace rolesteer

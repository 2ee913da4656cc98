#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rolesteer/sae.hpp"
#include "rolesteer/selection.hpp"

namespace rolesteer {

enum class InjectionScope {
    // Inject at the final position of every forward pass while decoding.
    every_step_last_token,
    // Inject once, at the last prompt position.
    prefill_only,
};

std::string_view to_string(InjectionScope scope);
InjectionScope parse_injection_scope(std::string_view text);

struct SteeringConfig {
    float strength = 0.0f;
    int layer = 0;
    InjectionScope scope = InjectionScope::every_step_last_token;
    bool normalize = true;

    void validate() const;
};

struct SteeringVector {
    std::vector<float> shift;  // [h]
    std::vector<std::size_t> indices;
    std::vector<double> alpha;
    int layer = 0;
    float default_strength = 0.0f;
    std::string sae_tag;

    friend bool operator==(const SteeringVector&, const SteeringVector&) = default;
};

// shift = sum_i alpha_i * W_dec[indices_i, :], accumulated in float64. No bias term.
SteeringVector build_shift(const SaeModel& sae, const SelectedFeatures& selected, int layer);

// Recomputes the shift from indices and alpha; used to check a vector against its SAE.
std::vector<float> recompose_shift(const SaeModel& sae, std::span<const std::size_t> indices,
                                   std::span<const double> alpha);

// r' = r + strength * s, then (when `normalize`) rescaled to the L2 norm of r.
// Throws NumericalError when r' has zero norm and normalization is requested.
std::vector<float> apply(std::span<const float> residual, std::span<const float> shift, float strength,
                         bool normalize = true);

// In-place variant used by model hooks.
void apply_in_place(std::span<float> residual, std::span<const float> shift, float strength, bool normalize = true);

double l2_norm(std::span<const float> v);
double cosine(std::span<const float> a, std::span<const float> b);

// Vector directory: vector.json + shift.safetensors.
void save_vector(const SteeringVector& vector, const std::filesystem::path& dir);
SteeringVector load_vector(const std::filesystem::path& dir);

}  // namespace rolesteer

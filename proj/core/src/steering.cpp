#include "rolesteer/steering.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rolesteer/error.hpp"
#include "rolesteer/safetensors.hpp"

namespace rolesteer {

std::string_view to_string(InjectionScope scope) {
    return scope == InjectionScope::every_step_last_token ? "every_step_last_token" : "prefill_only";
}

InjectionScope parse_injection_scope(std::string_view text) {
    if (text == "every_step_last_token") return InjectionScope::every_step_last_token;
    if (text == "prefill_only") return InjectionScope::prefill_only;
    throw UsageError("unknown injection scope '" + std::string(text) + "'");
}

void SteeringConfig::validate() const {
    if (!std::isfinite(strength)) throw UsageError("steering: strength must be finite");
    if (layer < 0) throw UsageError("steering: layer must be >= 0");
}

std::vector<float> recompose_shift(const SaeModel& sae, std::span<const std::size_t> indices,
                                   std::span<const double> alpha) {
    if (indices.empty()) throw UsageError("build_shift: no features selected (k = 0)");
    if (indices.size() != alpha.size()) throw UsageError("build_shift: indices and alpha differ in length");
    const std::size_t h = sae.hidden_size();
    std::vector<double> acc(h, 0.0);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= sae.feature_count()) {
            throw UsageError("build_shift: feature " + std::to_string(indices[k]) + " out of range [0, " +
                             std::to_string(sae.feature_count()) + ")");
        }
        if (!std::isfinite(alpha[k])) throw NumericalError("build_shift: non-finite alpha");
        const auto row = sae.dec_weight().row(indices[k]);
        for (std::size_t j = 0; j < h; ++j) acc[j] += alpha[k] * static_cast<double>(row[j]);
    }
    std::vector<float> shift(acc.begin(), acc.end());
    if (!all_finite(shift)) throw NumericalError("build_shift: shift overflowed float32");
    return shift;
}

SteeringVector build_shift(const SaeModel& sae, const SelectedFeatures& selected, int layer) {
    SteeringVector v;
    v.shift = recompose_shift(sae, selected.indices, selected.alpha);
    v.indices = selected.indices;
    v.alpha = selected.alpha;
    v.layer = layer;
    v.sae_tag = sae.source_tag();
    return v;
}

void apply_in_place(std::span<float> residual, std::span<const float> shift, float strength, bool normalize) {
    if (residual.size() != shift.size()) {
        throw UsageError("apply: residual length " + std::to_string(residual.size()) + " vs shift length " +
                         std::to_string(shift.size()));
    }
    const std::size_t h = residual.size();
    std::vector<double> updated(h);
    double norm_before = 0.0, norm_after = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        const double r = residual[j];
        updated[j] = r + static_cast<double>(strength) * static_cast<double>(shift[j]);
        norm_before += r * r;
        norm_after += updated[j] * updated[j];
    }
    double scale = 1.0;
    if (normalize) {
        norm_before = std::sqrt(norm_before);
        norm_after = std::sqrt(norm_after);
        if (norm_after == 0.0) {
            throw NumericalError("apply: steered residual has zero norm (strength * shift cancels the residual)");
        }
        if (!std::isfinite(norm_after)) throw NumericalError("apply: steered residual is not finite");
        scale = norm_before / norm_after;
    }
    for (std::size_t j = 0; j < h; ++j) residual[j] = static_cast<float>(updated[j] * scale);
}

std::vector<float> apply(std::span<const float> residual, std::span<const float> shift, float strength,
                         bool normalize) {
    std::vector<float> out(residual.begin(), residual.end());
    apply_in_place(out, shift, strength, normalize);
    return out;
}

double l2_norm(std::span<const float> v) {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * x;
    return std::sqrt(sum);
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw UsageError("cosine: length mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
    const double denom = l2_norm(a) * l2_norm(b);
    if (denom == 0.0) throw NumericalError("cosine: zero-norm vector");
    return dot / denom;
}

void save_vector(const SteeringVector& v, const std::filesystem::path& dir) {
    if (v.indices.size() != v.alpha.size()) throw UsageError("save_vector: indices and alpha differ in length");
    std::filesystem::create_directories(dir);
    TensorMap tensors;
    tensors["shift"] = Tensor{{static_cast<std::int64_t>(v.shift.size())}, v.shift};
    write_safetensors(dir / "shift.safetensors", tensors);
    nlohmann::json meta = {
        {"indices", v.indices},
        {"alpha", v.alpha},
        {"layer", v.layer},
        {"lambda", shortest_double(v.default_strength)},
        {"sae_tag", v.sae_tag},
        {"hidden_size", v.shift.size()},
    };
    std::ofstream out(dir / "vector.json", std::ios::trunc);
    if (!out) throw DataError("save_vector: cannot write '" + (dir / "vector.json").string() + "'");
    out << meta.dump(2) << '\n';
}

SteeringVector load_vector(const std::filesystem::path& dir) {
    std::ifstream in(dir / "vector.json");
    if (!in) throw DataError("load_vector: cannot open '" + (dir / "vector.json").string() + "'");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_vector: vector.json is not valid JSON: " + std::string(e.what()));
    }
    SteeringVector v;
    try {
        v.indices = meta.at("indices").get<std::vector<std::size_t>>();
        v.alpha = meta.at("alpha").get<std::vector<double>>();
        v.layer = meta.at("layer").get<int>();
        v.default_strength = static_cast<float>(meta.at("lambda").get<double>());
        v.sae_tag = meta.at("sae_tag").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_vector: schema violation: " + std::string(e.what()));
    }
    if (v.indices.size() != v.alpha.size()) throw DataError("load_vector: indices and alpha differ in length");
    const auto file = read_safetensors(dir / "shift.safetensors");
    const auto& t = require_tensor(file, "shift", "load_vector");
    if (t.shape.size() != 1) throw DataError("load_vector: 'shift' must be 1-D");
    v.shift = t.values;
    if (meta.contains("hidden_size") && meta["hidden_size"].get<std::size_t>() != v.shift.size()) {
        throw DataError("load_vector: hidden_size disagrees with the shift tensor length");
    }
    if (!all_finite(v.shift)) throw DataError("load_vector: shift contains NaN or Inf");
    return v;
}

}  // namespace rolesteer

#include "rolesteer/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <Eigen/Dense>

#include "rolesteer/error.hpp"
#include "rolesteer/rng.hpp"

namespace rolesteer {

namespace {

// Token templates. Content tokens (unmasked) carry the sample latents; the
// rest are removed by token_mask.
struct TokenSlot {
    const char* text;
    bool is_bos;
    bool content;
};

constexpr TokenSlot kPositiveTemplate[] = {
    {"<bos>", true, false},   {"▁As", false, false},     {"▁a", false, false},
    {"▁teacher", false, true}, {",", false, false},      {"▁the", false, false},
    {"▁question", false, true}, {"?", false, false},
};

constexpr TokenSlot kNegativeTemplate[] = {
    {"<bos>", true, false},   {"▁The", false, false},   {"▁question", false, true},
    {",", false, false},      {"▁answer", false, true}, {".", false, false},
};

constexpr std::size_t kContentTokens = 2;

SaeModel make_sae(const SynthSpec& spec) {
    const std::size_t d = spec.features;
    const std::size_t h = spec.hidden;
    SaeModel::Weights w;
    w.enc_bias.assign(d, 0.0f);
    w.dec_bias.assign(h, 0.0f);
    w.activation = SaeActivation::relu;
    w.source_tag = "synthetic/" + std::string(to_string(spec.sae_mode)) + "/seed-" + std::to_string(spec.seed);
    w.enc_weight = Matrix(h, d);
    w.dec_weight = Matrix(d, h);
    if (spec.sae_mode == SynthSaeMode::identity_like) {
        for (std::size_t i = 0; i < d; ++i) {
            w.enc_weight(i, i) = 1.0f;
            w.dec_weight(i, i) = 1.0f;
        }
    } else {
        SplitMix64 rng(derive_seed(spec.seed, 0xA11CE));
        Eigen::MatrixXd gaussian(h, d);
        for (Eigen::Index c = 0; c < gaussian.cols(); ++c) {
            for (Eigen::Index r = 0; r < gaussian.rows(); ++r) gaussian(r, c) = rng.normal();
        }
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ() *
                                  Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < h; ++j) {
            for (std::size_t i = 0; i < d; ++i) {
                const auto v = static_cast<float>(q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
                w.enc_weight(j, i) = v;
                w.dec_weight(i, j) = v;
            }
        }
    }
    return SaeModel(std::move(w));
}

// Residual for a latent vector. Decoding through the identity is the identity,
// so the identity-like case skips the dense product.
std::vector<float> to_residual(const SaeModel& sae, SynthSaeMode mode, const std::vector<float>& latents) {
    if (mode == SynthSaeMode::identity_like) return latents;
    return decode(sae, latents);
}

ActivationRecord make_record(const SynthSpec& spec, const SaeModel& sae, std::span<const TokenSlot> layout,
                             const std::vector<float>& sample_latents, const std::vector<std::size_t>& decoys,
                             float decoy_value, SplitMix64& rng) {
    const std::size_t d = spec.features;
    ActivationRecord rec;
    rec.residuals = Matrix(layout.size(), spec.hidden);
    std::size_t content_index = 0;
    for (std::size_t t = 0; t < layout.size(); ++t) {
        rec.tokens.push_back({layout[t].text, layout[t].is_bos});
        rec.prompt_text += layout[t].is_bos ? "" : layout[t].text;
        std::vector<float> latents(d, 0.0f);
        if (layout[t].content) {
            // Content token k carries twice the sample latent on features i with
            // i % kContentTokens == k, so the mean over content tokens is exact.
            for (std::size_t i = content_index; i < d; i += kContentTokens) latents[i] = 2.0f * sample_latents[i];
            ++content_index;
        } else {
            for (auto i : decoys) latents[i] = decoy_value * static_cast<float>(0.5 + rng.uniform());
        }
        const auto residual = to_residual(sae, spec.sae_mode, latents);
        std::copy(residual.begin(), residual.end(), rec.residuals.row(t).begin());
    }
    return rec;
}

}  // namespace

std::string_view to_string(SynthSaeMode mode) {
    return mode == SynthSaeMode::identity_like ? "identity_like" : "random_orthogonal";
}

SynthSaeMode parse_synth_sae_mode(std::string_view text) {
    if (text == "identity_like") return SynthSaeMode::identity_like;
    if (text == "random_orthogonal") return SynthSaeMode::random_orthogonal;
    throw UsageError("synth: unknown sae_mode '" + std::string(text) + "'");
}

void SynthSpec::validate() const {
    if (n_pairs == 0) throw UsageError("synth: n_pairs must be >= 1");
    if (features == 0 || hidden == 0) throw UsageError("synth: features and hidden must be positive");
    if (!(shift > 0.0f) || !std::isfinite(shift)) throw UsageError("synth: shift c must be > 0");
    if (!(noise_sigma >= 0.0f) || !std::isfinite(noise_sigma)) throw UsageError("synth: noise_sigma must be >= 0");
    if (sae_mode == SynthSaeMode::identity_like && features != hidden) {
        throw UsageError("synth: identity_like requires features == hidden");
    }
    if (sae_mode == SynthSaeMode::random_orthogonal && features > hidden) {
        throw UsageError("synth: random_orthogonal requires features <= hidden");
    }
    std::set<std::size_t> seen;
    for (auto p : planted) {
        if (p >= features) throw UsageError("synth: planted id " + std::to_string(p) + " >= features");
        if (!seen.insert(p).second) throw UsageError("synth: duplicate planted id " + std::to_string(p));
    }
    if (planted.size() + decoys > features) throw UsageError("synth: not enough features for planted + decoys");
}

std::vector<std::size_t> choose_planted(std::size_t features, std::size_t count, std::uint64_t seed) {
    if (count > features) throw UsageError("synth: cannot plant more features than exist");
    SplitMix64 rng(derive_seed(seed, 0x9A27ED));
    std::set<std::size_t> chosen;
    while (chosen.size() < count) chosen.insert(static_cast<std::size_t>(rng.below(features)));
    return {chosen.begin(), chosen.end()};
}

SynthResult gen_pairs(const SynthSpec& spec) {
    spec.validate();
    SaeModel sae = make_sae(spec);
    const std::size_t d = spec.features;

    std::vector<std::size_t> planted = spec.planted;
    std::sort(planted.begin(), planted.end());
    std::vector<bool> is_planted(d, false);
    for (auto p : planted) is_planted[p] = true;

    // Decoys: the first non-planted ids after a seeded offset.
    std::vector<std::size_t> decoys;
    {
        SplitMix64 rng(derive_seed(spec.seed, 0xDEC0));
        std::size_t i = static_cast<std::size_t>(rng.below(d));
        while (decoys.size() < spec.decoys) {
            if (!is_planted[i] && std::find(decoys.begin(), decoys.end(), i) == decoys.end()) decoys.push_back(i);
            i = (i + 1) % d;
        }
    }

    PairSet set;
    set.model_tag = "synthetic";
    set.layer = 0;
    set.hidden_size = spec.hidden;
    set.pairs.reserve(spec.n_pairs);
    std::vector<float> latents(d);
    for (std::size_t j = 0; j < spec.n_pairs; ++j) {
        SplitMix64 rng(derive_seed(spec.seed, j + 1));
        ActivationPair pair;
        pair.id = std::to_string(j);
        pair.variant = static_cast<int>(j % 5);
        for (int side = 0; side < 2; ++side) {
            for (std::size_t i = 0; i < d; ++i) {
                const double noise = spec.noise_sigma > 0.0f ? spec.noise_sigma * rng.normal() : 0.0;
                latents[i] = static_cast<float>(std::max(0.0, noise));
                if (side == 0 && is_planted[i]) latents[i] += spec.shift;
            }
            if (side == 0) {
                pair.positive = make_record(spec, sae, kPositiveTemplate, latents, decoys, spec.decoy_activation, rng);
            } else {
                pair.negative = make_record(spec, sae, kNegativeTemplate, latents, {}, 0.0f, rng);
            }
        }
        set.pairs.push_back(std::move(pair));
    }
    return {std::move(set), std::move(sae), std::move(planted)};
}

nlohmann::json ground_truth_json(const SynthSpec& spec, const std::vector<std::size_t>& planted) {
    return {
        {"planted", planted},
        {"spec",
         {{"n_pairs", spec.n_pairs},
          {"features", spec.features},
          {"hidden", spec.hidden},
          {"shift", shortest_double(spec.shift)},
          {"noise_sigma", shortest_double(spec.noise_sigma)},
          {"seed", spec.seed},
          {"sae_mode", to_string(spec.sae_mode)}}},
    };
}

std::vector<std::size_t> read_ground_truth(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open ground truth '" + file.string() + "'");
    try {
        return nlohmann::json::parse(in).at("planted").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ground truth '" + file.string() + "': " + e.what());
    }
}

double recovery_precision(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& planted) {
    if (selected.empty()) return 0.0;
    std::size_t hits = 0;
    for (auto id : selected) hits += std::find(planted.begin(), planted.end(), id) != planted.end() ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(selected.size());
}

}  // namespace rolesteer

#include "rolesteer/sae.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rolesteer/error.hpp"
#include "rolesteer/safetensors.hpp"

namespace rolesteer {

namespace {

constexpr std::size_t kRowBlock = 128;
constexpr std::size_t kColBlock = 512;

void check_finite(std::span<const float> values, const std::string& key) {
    if (!all_finite(values)) throw DataError("sae: tensor '" + key + "' contains NaN or Inf");
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& key) {
    if (m.rows != rows || m.cols != cols || m.data.size() != rows * cols) {
        throw DataError("sae: dimension mismatch for '" + key + "': got [" + std::to_string(m.rows) + "x" +
                        std::to_string(m.cols) + "], expected [" + std::to_string(rows) + "x" +
                        std::to_string(cols) + "]");
    }
}

void check_length(std::span<const float> v, std::size_t n, const std::string& key) {
    if (v.size() != n) {
        throw DataError("sae: dimension mismatch for '" + key + "': length " + std::to_string(v.size()) +
                        ", expected " + std::to_string(n));
    }
}

Matrix matrix_from(const Tensor& t, const std::string& key) {
    if (t.shape.size() != 2) throw DataError("sae: tensor '" + key + "' must be 2-D");
    Matrix m;
    m.rows = static_cast<std::size_t>(t.shape[0]);
    m.cols = static_cast<std::size_t>(t.shape[1]);
    m.data = t.values;
    return m;
}

std::vector<float> vector_from(const Tensor& t, const std::string& key) {
    if (t.shape.size() != 1) throw DataError("sae: tensor '" + key + "' must be 1-D");
    return t.values;
}

}  // namespace

std::string_view to_string(SaeActivation activation) {
    return activation == SaeActivation::relu ? "relu" : "jumprelu";
}

SaeActivation parse_sae_activation(std::string_view text) {
    if (text == "relu") return SaeActivation::relu;
    if (text == "jumprelu") return SaeActivation::jumprelu;
    throw DataError("sae: unknown activation '" + std::string(text) + "'");
}

SaeModel::SaeModel(Weights weights) : w_(std::move(weights)) {
    const std::size_t d = w_.enc_bias.size();
    const std::size_t h = w_.dec_bias.size();
    if (d == 0) throw DataError("sae: 'b_enc' is empty (feature count must be positive)");
    if (h == 0) throw DataError("sae: 'b_dec' is empty (hidden size must be positive)");
    check_shape(w_.enc_weight, h, d, "W_enc");
    check_shape(w_.dec_weight, d, h, "W_dec");

    if (w_.activation == SaeActivation::jumprelu) {
        if (!w_.jump_threshold) throw DataError("sae: activation is jumprelu but 'threshold' is missing");
        check_length(*w_.jump_threshold, d, "threshold");
        check_finite(*w_.jump_threshold, "threshold");
    } else if (w_.jump_threshold) {
        throw DataError("sae: 'threshold' present but activation is relu");
    }
    check_finite(w_.enc_weight.data, "W_enc");
    check_finite(w_.enc_bias, "b_enc");
    check_finite(w_.dec_weight.data, "W_dec");
    check_finite(w_.dec_bias, "b_dec");

    const auto& enc = w_.enc_weight.data;
    const auto nnz = static_cast<std::size_t>(std::count_if(enc.begin(), enc.end(), [](float v) { return v != 0.0f; }));
    if (nnz * 8 <= enc.size() && d <= UINT32_MAX) {
        SparseEncoder s;
        s.row_start.reserve(h + 1);
        s.feature.reserve(nnz);
        s.value.reserve(nnz);
        for (std::size_t j = 0; j < h; ++j) {
            s.row_start.push_back(s.feature.size());
            const auto row = w_.enc_weight.row(j);
            for (std::size_t i = 0; i < d; ++i) {
                if (row[i] != 0.0f) {
                    s.feature.push_back(static_cast<std::uint32_t>(i));
                    s.value.push_back(row[i]);
                }
            }
        }
        s.row_start.push_back(s.feature.size());
        sparse_ = std::move(s);
    }
}

bool operator==(const SaeModel::Weights& a, const SaeModel::Weights& b) {
    return a.enc_weight == b.enc_weight && a.enc_bias == b.enc_bias && a.dec_weight == b.dec_weight &&
           a.dec_bias == b.dec_bias && a.activation == b.activation && a.jump_threshold == b.jump_threshold &&
           a.source_tag == b.source_tag && a.subtract_decoder_bias == b.subtract_decoder_bias;
}

bool operator==(const SaeModel& a, const SaeModel& b) { return a.w_ == b.w_; }

SaeModel load_sae(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "sae.json";
    std::ifstream in(manifest_path);
    if (!in) throw DataError("sae: cannot open manifest '" + manifest_path.string() + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("sae: manifest is not valid JSON: " + std::string(e.what()));
    }
    for (const char* key : {"d", "h", "activation", "source_tag"}) {
        if (!manifest.contains(key)) throw DataError(std::string("sae: manifest missing key '") + key + "'");
    }
    if (!manifest["d"].is_number_unsigned() || !manifest["h"].is_number_unsigned()) {
        throw DataError("sae: manifest 'd' and 'h' must be positive integers");
    }

    const auto file = read_safetensors(dir / "sae.safetensors");
    const std::string ctx = "sae";
    SaeModel::Weights w;
    w.enc_weight = matrix_from(require_tensor(file, "W_enc", ctx), "W_enc");
    w.enc_bias = vector_from(require_tensor(file, "b_enc", ctx), "b_enc");
    w.dec_weight = matrix_from(require_tensor(file, "W_dec", ctx), "W_dec");
    w.dec_bias = vector_from(require_tensor(file, "b_dec", ctx), "b_dec");
    if (auto it = file.tensors.find("threshold"); it != file.tensors.end()) {
        w.jump_threshold = vector_from(it->second, "threshold");
    }
    w.activation = parse_sae_activation(manifest["activation"].get<std::string>());
    w.source_tag = manifest["source_tag"].get<std::string>();
    w.subtract_decoder_bias = manifest.value("subtract_decoder_bias", false);

    const auto d = manifest["d"].get<std::size_t>();
    const auto h = manifest["h"].get<std::size_t>();
    if (w.enc_bias.size() != d) {
        throw DataError("sae: dimension mismatch for 'b_enc': length " + std::to_string(w.enc_bias.size()) +
                        ", manifest d = " + std::to_string(d));
    }
    if (w.dec_bias.size() != h) {
        throw DataError("sae: dimension mismatch for 'b_dec': length " + std::to_string(w.dec_bias.size()) +
                        ", manifest h = " + std::to_string(h));
    }
    return SaeModel(std::move(w));
}

void save_sae(const SaeModel& sae, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto d = static_cast<std::int64_t>(sae.feature_count());
    const auto h = static_cast<std::int64_t>(sae.hidden_size());
    TensorMap tensors;
    tensors["W_enc"] = Tensor{{h, d}, sae.enc_weight().data};
    tensors["b_enc"] = Tensor{{d}, sae.enc_bias()};
    tensors["W_dec"] = Tensor{{d, h}, sae.dec_weight().data};
    tensors["b_dec"] = Tensor{{h}, sae.dec_bias()};
    if (sae.jump_threshold()) tensors["threshold"] = Tensor{{d}, *sae.jump_threshold()};
    write_safetensors(dir / "sae.safetensors", tensors);

    nlohmann::json manifest = {
        {"d", sae.feature_count()},
        {"h", sae.hidden_size()},
        {"activation", to_string(sae.activation())},
        {"source_tag", sae.source_tag()},
    };
    if (sae.subtract_decoder_bias()) manifest["subtract_decoder_bias"] = true;
    std::ofstream out(dir / "sae.json", std::ios::trunc);
    if (!out) throw DataError("sae: cannot write manifest in '" + dir.string() + "'");
    out << manifest.dump(2) << '\n';
}

Matrix encode_batch(const SaeModel& sae, const Matrix& X) {
    const std::size_t d = sae.feature_count();
    const std::size_t h = sae.hidden_size();
    if (X.cols != h && !(X.rows == 0 && X.cols == 0)) {
        throw UsageError("encode: input has " + std::to_string(X.cols) + " columns, SAE hidden size is " +
                         std::to_string(h));
    }
    Matrix out(X.rows, d);
    if (X.rows == 0) return out;

    const Matrix& W = sae.enc_weight();
    const auto& bias = sae.enc_bias();
    const auto& dec_bias = sae.dec_bias();
    const bool shift_input = sae.subtract_decoder_bias();
    const float* threshold = sae.jump_threshold() ? sae.jump_threshold()->data() : nullptr;

    const auto activate = [&](const double* a, float* dst, std::size_t first, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const double floor = threshold ? static_cast<double>(threshold[first + i]) : 0.0;
            dst[i] = a[i] > floor ? static_cast<float>(a[i]) : 0.0f;
        }
    };

    std::vector<double> acc;
    if (const auto& sparse = sae.sparse_encoder()) {
        // Same per-feature summation order as the dense kernel; skipped terms are exact zeros.
        acc.resize(d);
        for (std::size_t t = 0; t < X.rows; ++t) {
            std::copy(bias.begin(), bias.end(), acc.begin());
            const auto x = X.row(t);
            for (std::size_t j = 0; j < h; ++j) {
                const double xv = shift_input ? x[j] - dec_bias[j] : x[j];
                if (xv == 0.0) continue;
                for (std::size_t n = sparse->row_start[j]; n < sparse->row_start[j + 1]; ++n) {
                    acc[sparse->feature[n]] += xv * static_cast<double>(sparse->value[n]);
                }
            }
            activate(acc.data(), out.data.data() + t * d, 0, d);
        }
        return out;
    }

    std::vector<float> xblock;
    for (std::size_t r0 = 0; r0 < X.rows; r0 += kRowBlock) {
        const std::size_t nr = std::min(kRowBlock, X.rows - r0);
        // Input values for this row block, transposed to [h x nr].
        xblock.assign(h * nr, 0.0f);
        for (std::size_t t = 0; t < nr; ++t) {
            const auto x = X.row(r0 + t);
            for (std::size_t j = 0; j < h; ++j) xblock[j * nr + t] = shift_input ? x[j] - dec_bias[j] : x[j];
        }
        for (std::size_t c0 = 0; c0 < d; c0 += kColBlock) {
            const std::size_t nc = std::min(kColBlock, d - c0);
            acc.resize(nr * nc);
            for (std::size_t t = 0; t < nr; ++t) {
                for (std::size_t i = 0; i < nc; ++i) acc[t * nc + i] = bias[c0 + i];
            }
            for (std::size_t j = 0; j < h; ++j) {
                const float* w = W.data.data() + j * d + c0;
                for (std::size_t t = 0; t < nr; ++t) {
                    const double xv = xblock[j * nr + t];
                    if (xv == 0.0) continue;
                    double* a = acc.data() + t * nc;
                    for (std::size_t i = 0; i < nc; ++i) a[i] += xv * static_cast<double>(w[i]);
                }
            }
            for (std::size_t t = 0; t < nr; ++t) {
                float* dst = out.data.data() + (r0 + t) * d + c0;
                const double* a = acc.data() + t * nc;
                activate(a, dst, c0, nc);
            }
        }
    }
    return out;
}

std::vector<float> encode(const SaeModel& sae, std::span<const float> x) {
    if (x.size() != sae.hidden_size()) {
        throw UsageError("encode: input length " + std::to_string(x.size()) + ", SAE hidden size is " +
                         std::to_string(sae.hidden_size()));
    }
    Matrix one(1, x.size());
    std::copy(x.begin(), x.end(), one.data.begin());
    return std::move(encode_batch(sae, one).data);
}

std::vector<float> decode(const SaeModel& sae, std::span<const float> latents) {
    const std::size_t d = sae.feature_count();
    const std::size_t h = sae.hidden_size();
    if (latents.size() != d) {
        throw UsageError("decode: latent length " + std::to_string(latents.size()) + ", SAE feature count is " +
                         std::to_string(d));
    }
    std::vector<double> acc(sae.dec_bias().begin(), sae.dec_bias().end());
    const Matrix& W = sae.dec_weight();
    for (std::size_t i = 0; i < d; ++i) {
        const double a = latents[i];
        if (a == 0.0) continue;
        const float* w = W.data.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) acc[j] += a * static_cast<double>(w[j]);
    }
    return {acc.begin(), acc.end()};
}

std::vector<float> decoder_row(const SaeModel& sae, std::size_t feature) {
    if (feature >= sae.feature_count()) {
        throw UsageError("decoder_row: feature " + std::to_string(feature) + " out of range [0, " +
                         std::to_string(sae.feature_count()) + ")");
    }
    const auto row = sae.dec_weight().row(feature);
    return {row.begin(), row.end()};
}

}  // namespace rolesteer

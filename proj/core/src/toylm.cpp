#include "rolesteer/toylm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rolesteer/error.hpp"
#include "rolesteer/rng.hpp"

namespace rolesteer {

namespace {

constexpr float kNormEps = 1e-5f;

Matrix uniform_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = static_cast<float>(rng.uniform(-scale, scale));
    return m;
}

std::vector<float> uniform_vector(SplitMix64& rng, std::size_t n, double scale) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
    return v;
}

void layer_norm(std::span<const float> x, std::span<const float> gain, std::span<const float> bias,
                std::span<float> out) {
    const std::size_t n = x.size();
    float mean = 0.0f;
    for (float v : x) mean += v;
    mean /= static_cast<float>(n);
    float var = 0.0f;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= static_cast<float>(n);
    const float inv = 1.0f / std::sqrt(var + kNormEps);
    for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
}

// out = x * W + b for every row of x.
Matrix linear(const Matrix& x, const Matrix& W, std::span<const float> b) {
    Matrix out(x.rows, W.cols);
    for (std::size_t t = 0; t < x.rows; ++t) {
        float* y = out.data.data() + t * W.cols;
        for (std::size_t o = 0; o < W.cols; ++o) y[o] = b[o];
        for (std::size_t i = 0; i < W.rows; ++i) {
            const float xi = x(t, i);
            const float* w = W.data.data() + i * W.cols;
            for (std::size_t o = 0; o < W.cols; ++o) y[o] += xi * w[o];
        }
    }
    return out;
}

float gelu(float x) {
    constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
    return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

// FNV-1a over the raw float bytes.
void hash_floats(std::uint64_t& h, std::span<const float> values) {
    for (float f : values) {
        unsigned char bytes[4];
        std::memcpy(bytes, &f, 4);
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
    }
}

Tensor to_tensor(const Matrix& m) {
    return {{static_cast<std::int64_t>(m.rows), static_cast<std::int64_t>(m.cols)}, m.data};
}
Tensor to_tensor(const std::vector<float>& v) { return {{static_cast<std::int64_t>(v.size())}, v}; }

Matrix matrix_param(const TensorMap& t, const std::string& key, std::size_t rows, std::size_t cols) {
    auto it = t.find(key);
    if (it == t.end()) throw DataError("toylm: missing tensor key '" + key + "'");
    if (it->second.shape != std::vector<std::int64_t>{static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols)}) {
        throw DataError("toylm: dimension mismatch for '" + key + "'");
    }
    Matrix m(rows, cols);
    m.data = it->second.values;
    return m;
}

std::vector<float> vector_param(const TensorMap& t, const std::string& key, std::size_t n) {
    auto it = t.find(key);
    if (it == t.end()) throw DataError("toylm: missing tensor key '" + key + "'");
    if (it->second.shape != std::vector<std::int64_t>{static_cast<std::int64_t>(n)}) {
        throw DataError("toylm: dimension mismatch for '" + key + "'");
    }
    return it->second.values;
}

}  // namespace

void ToyLmConfig::validate() const {
    if (vocab_size == 0 || hidden_size == 0 || layers == 0 || heads == 0 || context == 0) {
        throw UsageError("toylm: all dimensions must be positive");
    }
    if (hidden_size % heads != 0) throw UsageError("toylm: hidden_size must be divisible by heads");
    if (vocab_size > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
        throw UsageError("toylm: vocab_size too large");
    }
}

ToyLm::ToyLm(const ToyLmConfig& config) : config_(config) {
    config_.validate();
    const std::size_t h = config_.hidden_size;
    const std::size_t ff = 4 * h;
    SplitMix64 rng(config_.seed);
    const double attn_scale = std::sqrt(3.0 / static_cast<double>(h));
    const double down_scale = std::sqrt(3.0 / static_cast<double>(ff));

    tok_emb_ = uniform_matrix(rng, config_.vocab_size, h, 1.0);
    pos_emb_ = uniform_matrix(rng, config_.context, h, 0.1);
    blocks_.resize(config_.layers);
    for (auto& b : blocks_) {
        b.ln1_gain.assign(h, 1.0f);
        b.ln1_bias.assign(h, 0.0f);
        b.wq = uniform_matrix(rng, h, h, attn_scale);
        b.bq = uniform_vector(rng, h, 0.02);
        b.wk = uniform_matrix(rng, h, h, attn_scale);
        b.bk = uniform_vector(rng, h, 0.02);
        b.wv = uniform_matrix(rng, h, h, attn_scale);
        b.bv = uniform_vector(rng, h, 0.02);
        b.wo = uniform_matrix(rng, h, h, attn_scale);
        b.bo = uniform_vector(rng, h, 0.02);
        b.ln2_gain.assign(h, 1.0f);
        b.ln2_bias.assign(h, 0.0f);
        b.w_up = uniform_matrix(rng, h, ff, attn_scale);
        b.b_up = uniform_vector(rng, ff, 0.02);
        b.w_down = uniform_matrix(rng, ff, h, down_scale);
        b.b_down = uniform_vector(rng, h, 0.02);
    }
    lnf_gain_.assign(h, 1.0f);
    lnf_bias_.assign(h, 0.0f);
    unembed_ = uniform_matrix(rng, h, config_.vocab_size, 2.0 * attn_scale);
}

void ToyLm::check_tokens(std::span<const int> tokens) const {
    if (tokens.empty()) throw UsageError("toylm: empty token sequence");
    if (tokens.size() > config_.context) {
        throw UsageError("toylm: sequence length " + std::to_string(tokens.size()) + " exceeds context " +
                         std::to_string(config_.context));
    }
    for (int t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
            throw UsageError("toylm: token id " + std::to_string(t) + " outside vocabulary");
        }
    }
}

Matrix ToyLm::embed(std::span<const int> tokens) const {
    check_tokens(tokens);
    const std::size_t h = config_.hidden_size;
    Matrix x(tokens.size(), h);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto te = tok_emb_.row(static_cast<std::size_t>(tokens[t]));
        const auto pe = pos_emb_.row(t);
        for (std::size_t j = 0; j < h; ++j) x(t, j) = te[j] + pe[j];
    }
    return x;
}

void ToyLm::run_block(std::size_t layer, Matrix& x) const {
    if (layer >= blocks_.size()) throw UsageError("toylm: layer " + std::to_string(layer) + " out of range");
    const Block& b = blocks_[layer];
    const std::size_t T = x.rows;
    const std::size_t h = config_.hidden_size;
    const std::size_t hd = h / config_.heads;

    Matrix normed(T, h);
    for (std::size_t t = 0; t < T; ++t) layer_norm(x.row(t), b.ln1_gain, b.ln1_bias, normed.row(t));
    const Matrix q = linear(normed, b.wq, b.bq);
    const Matrix k = linear(normed, b.wk, b.bk);
    const Matrix v = linear(normed, b.wv, b.bv);

    Matrix attn(T, h);
    std::vector<float> weights(T);
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));
    for (std::size_t head = 0; head < config_.heads; ++head) {
        const std::size_t off = head * hd;
        for (std::size_t t = 0; t < T; ++t) {
            float max_score = -std::numeric_limits<float>::infinity();
            for (std::size_t s = 0; s <= t; ++s) {
                float dot = 0.0f;
                for (std::size_t j = 0; j < hd; ++j) dot += q(t, off + j) * k(s, off + j);
                weights[s] = dot * inv_sqrt;
                max_score = std::max(max_score, weights[s]);
            }
            float denom = 0.0f;
            for (std::size_t s = 0; s <= t; ++s) {
                weights[s] = std::exp(weights[s] - max_score);
                denom += weights[s];
            }
            for (std::size_t j = 0; j < hd; ++j) {
                float acc = 0.0f;
                for (std::size_t s = 0; s <= t; ++s) acc += weights[s] * v(s, off + j);
                attn(t, off + j) = acc / denom;
            }
        }
    }
    const Matrix projected = linear(attn, b.wo, b.bo);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += projected.data[i];

    for (std::size_t t = 0; t < T; ++t) layer_norm(x.row(t), b.ln2_gain, b.ln2_bias, normed.row(t));
    Matrix up = linear(normed, b.w_up, b.b_up);
    for (auto& u : up.data) u = gelu(u);
    const Matrix down = linear(up, b.w_down, b.b_down);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += down.data[i];
}

Matrix ToyLm::logits(const Matrix& x) const {
    Matrix normed(x.rows, x.cols);
    for (std::size_t t = 0; t < x.rows; ++t) layer_norm(x.row(t), lnf_gain_, lnf_bias_, normed.row(t));
    const std::vector<float> zero(config_.vocab_size, 0.0f);
    return linear(normed, unembed_, zero);
}

void ToyLm::inject(Matrix& x, const Injection& inj, std::vector<InjectionEvent>* events) const {
    if (inj.shift.size() != config_.hidden_size) {
        throw UsageError("toylm: steering shift has length " + std::to_string(inj.shift.size()) +
                         ", model hidden size is " + std::to_string(config_.hidden_size));
    }
    const double shift_norm = l2_norm(inj.shift);
    for (std::size_t t = inj.first_position; t < std::min(inj.end_position, x.rows); ++t) {
        auto row = x.row(t);
        InjectionEvent ev;
        ev.position = t;
        ev.norm_before = l2_norm(row);
        apply_in_place(row, inj.shift, inj.strength, inj.normalize);
        ev.norm_after = l2_norm(row);
        ev.cos_with_shift = (shift_norm > 0.0 && ev.norm_after > 0.0) ? cosine(row, inj.shift) : 0.0;
        if (events) events->push_back(ev);
    }
}

Matrix ToyLm::forward_capture(std::span<const int> tokens, std::size_t layer, const Injection* injection,
                              std::vector<InjectionEvent>* events) const {
    if (layer >= blocks_.size()) throw UsageError("toylm: capture layer " + std::to_string(layer) + " out of range");
    if (injection && injection->layer >= blocks_.size()) throw UsageError("toylm: injection layer out of range");
    Matrix x = embed(tokens);
    for (std::size_t l = 0; l <= layer; ++l) {
        run_block(l, x);
        if (injection && injection->layer == l) inject(x, *injection, events);
    }
    return x;
}

Matrix ToyLm::forward_logits(std::span<const int> tokens, const Injection* injection,
                             std::vector<InjectionEvent>* events) const {
    return logits(forward_capture(tokens, blocks_.size() - 1, injection, events));
}

Matrix ToyLm::resume_from(Matrix residual, std::size_t layer) const {
    if (layer >= blocks_.size()) throw UsageError("toylm: resume layer out of range");
    if (residual.cols != config_.hidden_size) throw UsageError("toylm: residual width mismatch");
    for (std::size_t l = layer + 1; l < blocks_.size(); ++l) run_block(l, residual);
    return logits(residual);
}

TensorMap ToyLm::parameters() const {
    TensorMap t;
    t["tok_emb"] = to_tensor(tok_emb_);
    t["pos_emb"] = to_tensor(pos_emb_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        t[p + "ln1_gain"] = to_tensor(b.ln1_gain);
        t[p + "ln1_bias"] = to_tensor(b.ln1_bias);
        t[p + "wq"] = to_tensor(b.wq);
        t[p + "bq"] = to_tensor(b.bq);
        t[p + "wk"] = to_tensor(b.wk);
        t[p + "bk"] = to_tensor(b.bk);
        t[p + "wv"] = to_tensor(b.wv);
        t[p + "bv"] = to_tensor(b.bv);
        t[p + "wo"] = to_tensor(b.wo);
        t[p + "bo"] = to_tensor(b.bo);
        t[p + "ln2_gain"] = to_tensor(b.ln2_gain);
        t[p + "ln2_bias"] = to_tensor(b.ln2_bias);
        t[p + "w_up"] = to_tensor(b.w_up);
        t[p + "b_up"] = to_tensor(b.b_up);
        t[p + "w_down"] = to_tensor(b.w_down);
        t[p + "b_down"] = to_tensor(b.b_down);
    }
    t["lnf_gain"] = to_tensor(lnf_gain_);
    t["lnf_bias"] = to_tensor(lnf_bias_);
    t["unembed"] = to_tensor(unembed_);
    return t;
}

ToyLm ToyLm::from_parameters(const ToyLmConfig& config, const TensorMap& t) {
    config.validate();
    const std::size_t h = config.hidden_size;
    const std::size_t ff = 4 * h;
    ToyLm lm;
    lm.config_ = config;
    lm.tok_emb_ = matrix_param(t, "tok_emb", config.vocab_size, h);
    lm.pos_emb_ = matrix_param(t, "pos_emb", config.context, h);
    lm.blocks_.resize(config.layers);
    for (std::size_t i = 0; i < config.layers; ++i) {
        auto& b = lm.blocks_[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        b.ln1_gain = vector_param(t, p + "ln1_gain", h);
        b.ln1_bias = vector_param(t, p + "ln1_bias", h);
        b.wq = matrix_param(t, p + "wq", h, h);
        b.bq = vector_param(t, p + "bq", h);
        b.wk = matrix_param(t, p + "wk", h, h);
        b.bk = vector_param(t, p + "bk", h);
        b.wv = matrix_param(t, p + "wv", h, h);
        b.bv = vector_param(t, p + "bv", h);
        b.wo = matrix_param(t, p + "wo", h, h);
        b.bo = vector_param(t, p + "bo", h);
        b.ln2_gain = vector_param(t, p + "ln2_gain", h);
        b.ln2_bias = vector_param(t, p + "ln2_bias", h);
        b.w_up = matrix_param(t, p + "w_up", h, ff);
        b.b_up = vector_param(t, p + "b_up", ff);
        b.w_down = matrix_param(t, p + "w_down", ff, h);
        b.b_down = vector_param(t, p + "b_down", h);
    }
    lm.lnf_gain_ = vector_param(t, "lnf_gain", h);
    lm.lnf_bias_ = vector_param(t, "lnf_bias", h);
    lm.unembed_ = matrix_param(t, "unembed", h, config.vocab_size);
    for (const auto& [key, tensor] : t) {
        if (!all_finite(tensor.values)) throw DataError("toylm: tensor '" + key + "' contains NaN or Inf");
    }
    return lm;
}

std::uint64_t ToyLm::parameter_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& [key, tensor] : parameters()) hash_floats(h, tensor.values);
    return h;
}

void save_toy_lm(const ToyLm& lm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& c = lm.config();
    write_safetensors(dir / "toylm.safetensors", lm.parameters(),
                      {{"vocab_size", std::to_string(c.vocab_size)},
                       {"hidden_size", std::to_string(c.hidden_size)},
                       {"layers", std::to_string(c.layers)},
                       {"heads", std::to_string(c.heads)},
                       {"context", std::to_string(c.context)},
                       {"seed", std::to_string(c.seed)}});
}

ToyLm load_toy_lm(const std::filesystem::path& dir) {
    const auto file = read_safetensors(dir / "toylm.safetensors");
    auto field = [&](const char* key) -> std::uint64_t {
        auto it = file.metadata.find(key);
        if (it == file.metadata.end()) throw DataError(std::string("toylm: metadata missing '") + key + "'");
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw DataError(std::string("toylm: metadata '") + key + "' is not an integer");
        }
    };
    ToyLmConfig c;
    c.vocab_size = field("vocab_size");
    c.hidden_size = field("hidden_size");
    c.layers = field("layers");
    c.heads = field("heads");
    c.context = field("context");
    c.seed = field("seed");
    return ToyLm::from_parameters(c, file.tensors);
}

GenerationResult generate(const ToyLm& lm, std::span<const int> prompt, std::size_t max_new, const Steering* steer) {
    const auto& cfg = lm.config();
    if (prompt.empty()) throw UsageError("generate: empty prompt");
    if (prompt.size() + max_new > cfg.context) {
        throw UsageError("generate: prompt (" + std::to_string(prompt.size()) + ") + max_new (" +
                         std::to_string(max_new) + ") exceeds context " + std::to_string(cfg.context));
    }
    Injection injection;
    if (steer) {
        if (!steer->vector) throw UsageError("generate: steering requested without a vector");
        steer->config.validate();
        if (steer->vector->shift.size() != cfg.hidden_size) {
            throw UsageError("generate: steering vector hidden size " + std::to_string(steer->vector->shift.size()) +
                             " does not match model hidden size " + std::to_string(cfg.hidden_size));
        }
        if (static_cast<std::size_t>(steer->config.layer) >= cfg.layers) {
            throw UsageError("generate: steering layer " + std::to_string(steer->config.layer) + " out of range");
        }
        injection.layer = static_cast<std::size_t>(steer->config.layer);
        injection.shift = steer->vector->shift;
        injection.strength = steer->config.strength;
        injection.normalize = steer->config.normalize;
        injection.first_position = prompt.size() - 1;
        if (steer->config.scope == InjectionScope::prefill_only) injection.end_position = prompt.size();
    }

    GenerationResult result;
    result.tokens.assign(prompt.begin(), prompt.end());
    for (std::size_t step = 0; step < max_new; ++step) {
        std::vector<InjectionEvent> events;
        const Matrix logits = lm.forward_logits(result.tokens, steer ? &injection : nullptr, &events);
        for (const auto& ev : events) {
            if (ev.position + 1 == result.tokens.size()) result.injections.push_back(ev);
        }
        const auto last = logits.row(logits.rows - 1);
        const auto best = std::max_element(last.begin(), last.end());
        result.tokens.push_back(static_cast<int>(best - last.begin()));
    }
    return result;
}

}  // namespace rolesteer

#include "rolesteer/activations.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "rolesteer/error.hpp"
#include "rolesteer/safetensors.hpp"

namespace rolesteer {

namespace {

constexpr UChar32 kWordBoundaryMarker = 0x2581;  // SentencePiece "▁"
constexpr UChar32 kRightSingleQuote = 0x2019;
constexpr std::size_t kEncodeChunkRows = 256;

std::vector<UChar32> decode_utf8(std::string_view text) {
    std::vector<UChar32> out;
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c = 0;
        U8_NEXT(s, i, length, c);
        out.push_back(c < 0 ? 0xFFFD : c);
    }
    return out;
}

bool is_trimmable(UChar32 c) { return u_isUWhiteSpace(c) || c == kWordBoundaryMarker; }

// Trimmed, lowercased surface form used for the stopword lookup.
std::string normalized_word(std::string_view text) {
    auto cps = decode_utf8(text);
    std::size_t b = 0, e = cps.size();
    while (b < e && is_trimmable(cps[b])) ++b;
    while (e > b && is_trimmable(cps[e - 1])) --e;
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        UChar32 c = cps[i] == kRightSingleQuote ? U'\'' : u_tolower(cps[i]);
        char buf[U8_MAX_LENGTH];
        std::int32_t n = 0;
        U8_APPEND_UNSAFE(buf, n, c);
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

std::string record_label(const char* side, const std::string& id) { return std::string(side) + ":" + id; }

void validate_record(const ActivationRecord& rec, std::size_t hidden, const std::string& label) {
    const std::size_t T = rec.tokens.size();
    if (T == 0) throw DataError("pair " + label + ": record has no tokens");
    if (rec.residuals.rows != T) {
        throw DataError("pair " + label + ": " + std::to_string(T) + " tokens but " +
                        std::to_string(rec.residuals.rows) + " residual rows");
    }
    if (rec.residuals.cols != hidden || rec.residuals.data.size() != T * hidden) {
        throw DataError("pair " + label + ": residual width " + std::to_string(rec.residuals.cols) +
                        " does not match hidden_size " + std::to_string(hidden));
    }
    for (std::size_t t = 0; t < T; ++t) {
        if (rec.tokens[t].is_bos && t != 0) {
            throw DataError("pair " + label + ": BOS token at position " + std::to_string(t));
        }
    }
    if (!all_finite(rec.residuals.data)) throw DataError("pair " + label + ": residuals contain NaN or Inf");
}

std::vector<std::size_t> unmasked_rows(const ActivationRecord& rec) {
    const auto mask = token_mask(rec.tokens);
    std::vector<std::size_t> rows;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (mask[t]) rows.push_back(t);
    }
    return rows;
}

// Averages rows [first, first + count) of `encoded` into `dst` (float64 sum, ascending order).
void average_rows(const Matrix& encoded, std::size_t first, std::size_t count, std::span<float> dst) {
    if (count == 0) {
        std::fill(dst.begin(), dst.end(), 0.0f);
        return;
    }
    std::vector<double> sum(dst.size(), 0.0);
    for (std::size_t r = first; r < first + count; ++r) {
        const auto row = encoded.row(r);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += row[i];
    }
    const double inv = static_cast<double>(count);
    for (std::size_t i = 0; i < sum.size(); ++i) dst[i] = static_cast<float>(sum[i] / inv);
}

nlohmann::json tokens_to_json(const std::vector<TokenMeta>& tokens) {
    auto arr = nlohmann::json::array();
    for (const auto& t : tokens) arr.push_back({{"text", t.text}, {"is_bos", t.is_bos}});
    return arr;
}

std::vector<TokenMeta> tokens_from_json(const nlohmann::json& arr, const std::string& label) {
    if (!arr.is_array()) throw DataError("pair " + label + ": token list is not an array");
    std::vector<TokenMeta> tokens;
    for (const auto& t : arr) {
        if (!t.is_object() || !t.contains("text") || !t["text"].is_string() || !t.contains("is_bos") ||
            !t["is_bos"].is_boolean()) {
            throw DataError("pair " + label + ": malformed token entry " + t.dump());
        }
        tokens.push_back({t["text"].get<std::string>(), t["is_bos"].get<bool>()});
    }
    return tokens;
}

bool safe_file_component(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    return id.find('/') == std::string::npos && id.find('\\') == std::string::npos;
}

void write_residual(const std::filesystem::path& path, const Matrix& residuals) {
    TensorMap tensors;
    tensors["residual"] = Tensor{{static_cast<std::int64_t>(residuals.rows), static_cast<std::int64_t>(residuals.cols)},
                                 residuals.data};
    write_safetensors(path, tensors);
}

Matrix read_residual(const std::filesystem::path& path, const std::string& label) {
    if (!std::filesystem::exists(path)) {
        throw DataError("pair " + label + ": tensor file '" + path.filename().string() + "' is missing");
    }
    SafetensorsFile file;
    try {
        file = read_safetensors(path);
    } catch (const DataError& e) {
        throw DataError("pair " + label + ": " + e.what());
    }
    const auto& t = require_tensor(file, "residual", "pair " + label);
    if (t.shape.size() != 2) throw DataError("pair " + label + ": 'residual' must have shape [T, h]");
    Matrix m;
    m.rows = static_cast<std::size_t>(t.shape[0]);
    m.cols = static_cast<std::size_t>(t.shape[1]);
    m.data = t.values;
    return m;
}

}  // namespace

bool is_punctuation_token(std::string_view text) {
    for (UChar32 c : decode_utf8(text)) {
        if (u_isUWhiteSpace(c)) continue;
        if ((U_GET_GC_MASK(c) & (U_GC_P_MASK | U_GC_S_MASK)) == 0) return false;
    }
    return true;
}

std::vector<bool> token_mask(std::span<const TokenMeta> tokens) {
    std::vector<bool> mask(tokens.size(), false);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto& tok = tokens[t];
        if (tok.is_bos || is_punctuation_token(tok.text)) continue;
        mask[t] = !is_stopword(normalized_word(tok.text));
    }
    return mask;
}

void validate(const PairSet& set) {
    if (set.pairs.empty()) throw DataError("pair set is empty");
    if (set.hidden_size == 0) throw DataError("pair set hidden_size must be positive");
    std::set<std::string> ids;
    for (const auto& pair : set.pairs) {
        if (!ids.insert(pair.id).second) throw DataError("pair " + pair.id + ": duplicate id");
        validate_record(pair.positive, set.hidden_size, record_label("pos", pair.id));
        validate_record(pair.negative, set.hidden_size, record_label("neg", pair.id));
    }
}

SampleMean sample_mean_latents(const SaeModel& sae, const ActivationRecord& record) {
    if (record.residuals.cols != sae.hidden_size()) {
        throw UsageError("sample_mean_latents: record width " + std::to_string(record.residuals.cols) +
                         " does not match SAE hidden size " + std::to_string(sae.hidden_size()));
    }
    const auto rows = unmasked_rows(record);
    Matrix selected(rows.size(), record.residuals.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = record.residuals.row(rows[r]);
        std::copy(src.begin(), src.end(), selected.row(r).begin());
    }
    const Matrix encoded = encode_batch(sae, selected);
    SampleMean result;
    result.latents.resize(sae.feature_count());
    result.used_tokens = rows.size();
    average_rows(encoded, 0, rows.size(), result.latents);
    return result;
}

LatentTable mean_latent_table(const SaeModel& sae, const PairSet& set, std::size_t limit) {
    if (set.hidden_size != sae.hidden_size()) {
        throw UsageError("pair set hidden size " + std::to_string(set.hidden_size) +
                         " does not match SAE hidden size " + std::to_string(sae.hidden_size()));
    }
    const std::size_t n = std::min(limit, set.pairs.size());
    const std::size_t d = sae.feature_count();
    const std::size_t h = sae.hidden_size();

    // Records in order pos0, neg0, pos1, neg1, ...; output row for record r.
    struct Job {
        const ActivationRecord* record;
        std::vector<std::size_t> rows;
        float* dst;
        std::string label;
    };
    LatentTable table{Matrix(n, d), Matrix(n, d), {}};
    std::vector<Job> jobs;
    jobs.reserve(2 * n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto& pair = set.pairs[p];
        for (int side = 0; side < 2; ++side) {
            const auto& rec = side == 0 ? pair.positive : pair.negative;
            if (rec.residuals.cols != h) {
                throw UsageError("pair " + pair.id + ": residual width does not match SAE hidden size");
            }
            Matrix& target = side == 0 ? table.positive : table.negative;
            jobs.push_back({&rec, unmasked_rows(rec), target.row(p).data(),
                            record_label(side == 0 ? "pos" : "neg", pair.id)});
        }
    }

    std::size_t j = 0;
    while (j < jobs.size()) {
        // Gather whole records until the chunk is full.
        std::size_t end = j, total = 0;
        while (end < jobs.size() && (end == j || total + jobs[end].rows.size() <= kEncodeChunkRows)) {
            total += jobs[end].rows.size();
            ++end;
        }
        Matrix chunk(total, h);
        std::size_t r = 0;
        for (std::size_t k = j; k < end; ++k) {
            for (std::size_t row : jobs[k].rows) {
                const auto src = jobs[k].record->residuals.row(row);
                std::copy(src.begin(), src.end(), chunk.row(r++).begin());
            }
        }
        const Matrix encoded = encode_batch(sae, chunk);
        std::size_t first = 0;
        for (std::size_t k = j; k < end; ++k) {
            const std::size_t count = jobs[k].rows.size();
            average_rows(encoded, first, count, {jobs[k].dst, d});
            if (count == 0) table.empty_mask_records.push_back(jobs[k].label);
            first += count;
        }
        j = end;
    }
    return table;
}

void write_dump(const PairSet& set, const std::filesystem::path& dir) {
    validate(set);
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = {
        {"model_tag", set.model_tag},
        {"layer", set.layer},
        {"hidden_size", set.hidden_size},
        {"pairs", nlohmann::json::array()},
    };
    for (const auto& pair : set.pairs) {
        if (!safe_file_component(pair.id)) throw DataError("pair " + pair.id + ": id is not a valid file name part");
        const std::string pos = "pos_" + pair.id + ".safetensors";
        const std::string neg = "neg_" + pair.id + ".safetensors";
        write_residual(dir / pos, pair.positive.residuals);
        write_residual(dir / neg, pair.negative.residuals);
        nlohmann::json entry = {
            {"id", pair.id},
            {"variant", pair.variant},
            {"pos", pos},
            {"neg", neg},
            {"pos_tokens", tokens_to_json(pair.positive.tokens)},
            {"neg_tokens", tokens_to_json(pair.negative.tokens)},
        };
        if (!pair.positive.prompt_text.empty()) entry["pos_prompt"] = pair.positive.prompt_text;
        if (!pair.negative.prompt_text.empty()) entry["neg_prompt"] = pair.negative.prompt_text;
        manifest["pairs"].push_back(std::move(entry));
    }
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw DataError("dump: cannot write manifest in '" + dir.string() + "'");
    out << manifest.dump(2) << '\n';
}

PairSet read_dump(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("dump: cannot open '" + (dir / "manifest.json").string() + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("dump: manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_object()) throw DataError("dump: manifest is not an object");
    if (!manifest.contains("model_tag") || !manifest["model_tag"].is_string()) {
        throw DataError("dump: manifest field 'model_tag' missing or not a string");
    }
    if (!manifest.contains("layer") || !manifest["layer"].is_number_integer()) {
        throw DataError("dump: manifest field 'layer' missing or not an integer");
    }
    if (!manifest.contains("hidden_size") || !manifest["hidden_size"].is_number_unsigned()) {
        throw DataError("dump: manifest field 'hidden_size' missing or not a positive integer");
    }
    if (!manifest.contains("pairs") || !manifest["pairs"].is_array()) {
        throw DataError("dump: manifest field 'pairs' missing or not an array");
    }

    PairSet set;
    set.model_tag = manifest["model_tag"].get<std::string>();
    set.layer = manifest["layer"].get<int>();
    set.hidden_size = manifest["hidden_size"].get<std::size_t>();
    std::size_t index = 0;
    for (const auto& entry : manifest["pairs"]) {
        const std::string fallback = "#" + std::to_string(index++);
        if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string()) {
            throw DataError("pair " + fallback + ": missing string 'id'");
        }
        ActivationPair pair;
        pair.id = entry["id"].get<std::string>();
        for (const char* key : {"pos", "neg"}) {
            if (!entry.contains(key) || !entry[key].is_string()) {
                throw DataError("pair " + pair.id + ": missing tensor file field '" + key + "'");
            }
        }
        if (!entry.contains("variant") || !entry["variant"].is_number_integer()) {
            throw DataError("pair " + pair.id + ": missing integer 'variant'");
        }
        if (!entry.contains("pos_tokens") || !entry.contains("neg_tokens")) {
            throw DataError("pair " + pair.id + ": missing token lists");
        }
        pair.variant = entry["variant"].get<int>();
        const auto pos_file = entry["pos"].get<std::string>();
        const auto neg_file = entry["neg"].get<std::string>();
        if (!safe_file_component(pos_file) || !safe_file_component(neg_file)) {
            throw DataError("pair " + pair.id + ": tensor file names must be plain file names");
        }
        pair.positive.tokens = tokens_from_json(entry["pos_tokens"], record_label("pos", pair.id));
        pair.negative.tokens = tokens_from_json(entry["neg_tokens"], record_label("neg", pair.id));
        pair.positive.residuals = read_residual(dir / pos_file, record_label("pos", pair.id));
        pair.negative.residuals = read_residual(dir / neg_file, record_label("neg", pair.id));
        pair.positive.prompt_text = entry.value("pos_prompt", std::string{});
        pair.negative.prompt_text = entry.value("neg_prompt", std::string{});
        set.pairs.push_back(std::move(pair));
    }
    validate(set);
    return set;
}

}  // namespace rolesteer

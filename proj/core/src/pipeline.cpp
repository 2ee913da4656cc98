#include "rolesteer/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>

#include "rolesteer/activations.hpp"
#include "rolesteer/error.hpp"
#include "rolesteer/rng.hpp"
#include "rolesteer/sae.hpp"

namespace rolesteer {

namespace fs = std::filesystem;

namespace {

// Reference hyperparameters: theta, beta, lambda per model, dataset
// and evaluation setting; k = 15 throughout. Layers: 25 for Llama3.1-8B and
// Gemma2-2B, 35 for Gemma2-9B.
constexpr std::array<HyperparameterPreset, 27> kPresets = {{
    {"llama31-gsm8k-4shot", "llama31", "gsm8k", 4, 0.2f, 3.0f, 5.0f, 25, 15},
    {"llama31-gsm8k-1shot", "llama31", "gsm8k", 1, 0.2f, 3.0f, 3.0f, 25, 15},
    {"llama31-gsm8k-0shot", "llama31", "gsm8k", 0, 0.2f, 3.0f, 3.0f, 25, 15},
    {"gemma2-2b-gsm8k-4shot", "gemma2-2b", "gsm8k", 4, 0.2f, 3.0f, 8.0f, 25, 15},
    {"gemma2-2b-gsm8k-1shot", "gemma2-2b", "gsm8k", 1, 0.2f, 5.0f, 14.0f, 25, 15},
    {"gemma2-2b-gsm8k-0shot", "gemma2-2b", "gsm8k", 0, 0.2f, 5.0f, 13.0f, 25, 15},
    {"gemma2-9b-gsm8k-4shot", "gemma2-9b", "gsm8k", 4, 0.2f, 5.0f, 11.0f, 35, 15},
    {"gemma2-9b-gsm8k-1shot", "gemma2-9b", "gsm8k", 1, 0.2f, 10.0f, 5.0f, 35, 15},
    {"gemma2-9b-gsm8k-0shot", "gemma2-9b", "gsm8k", 0, 0.2f, 10.0f, 6.0f, 35, 15},
    {"llama31-svamp-4shot", "llama31", "svamp", 4, 0.2f, 3.0f, 4.0f, 25, 15},
    {"llama31-svamp-1shot", "llama31", "svamp", 1, 0.0f, 5.0f, 4.0f, 25, 15},
    {"llama31-svamp-0shot", "llama31", "svamp", 0, 0.3f, 3.0f, 4.0f, 25, 15},
    {"gemma2-2b-svamp-4shot", "gemma2-2b", "svamp", 4, 0.2f, 3.0f, 5.0f, 25, 15},
    {"gemma2-2b-svamp-1shot", "gemma2-2b", "svamp", 1, 0.2f, 3.0f, 10.0f, 25, 15},
    {"gemma2-2b-svamp-0shot", "gemma2-2b", "svamp", 0, 0.2f, 3.0f, 10.0f, 25, 15},
    {"gemma2-9b-svamp-4shot", "gemma2-9b", "svamp", 4, 0.2f, 10.0f, 20.0f, 35, 15},
    {"gemma2-9b-svamp-1shot", "gemma2-9b", "svamp", 1, 0.2f, 10.0f, 30.0f, 35, 15},
    {"gemma2-9b-svamp-0shot", "gemma2-9b", "svamp", 0, 0.2f, 10.0f, 30.0f, 35, 15},
    {"llama31-csqa-4shot", "llama31", "csqa", 4, 0.2f, 3.0f, 10.0f, 25, 15},
    {"llama31-csqa-1shot", "llama31", "csqa", 1, 0.3f, 3.0f, 10.0f, 25, 15},
    {"llama31-csqa-0shot", "llama31", "csqa", 0, 0.3f, 3.0f, 10.0f, 25, 15},
    {"gemma2-2b-csqa-4shot", "gemma2-2b", "csqa", 4, 0.3f, 4.0f, 5.0f, 25, 15},
    {"gemma2-2b-csqa-1shot", "gemma2-2b", "csqa", 1, 0.3f, 15.0f, 5.0f, 25, 15},
    {"gemma2-2b-csqa-0shot", "gemma2-2b", "csqa", 0, 0.3f, 15.0f, 5.0f, 25, 15},
    {"gemma2-9b-csqa-4shot", "gemma2-9b", "csqa", 4, 0.2f, 3.0f, 35.0f, 35, 15},
    {"gemma2-9b-csqa-1shot", "gemma2-9b", "csqa", 1, 0.2f, 3.0f, 35.0f, 35, 15},
    {"gemma2-9b-csqa-0shot", "gemma2-9b", "csqa", 0, 0.2f, 3.0f, 10.0f, 35, 15},
}};

constexpr std::string_view kAlphabet =
    " abcdefghijklmnopqrstuvwxyz0123456789.,:;?!'\"()$%-+*/=\n#&<>[]_@~";
static_assert(kAlphabet.size() == 64);

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& target) {
    if (obj.contains(key) && !obj[key].is_null()) target = obj[key].get<T>();
}

void read_path(const nlohmann::json& obj, const char* key, fs::path& target) {
    if (obj.contains(key) && !obj[key].is_null()) target = obj[key].get<std::string>();
}

fs::path or_default(const fs::path& chosen, const fs::path& fallback) { return chosen.empty() ? fallback : chosen; }

nlohmann::json header(std::string_view command) {
    return {{"schema_version", kReportSchemaVersion}, {"command", command}};
}

struct LoadedSelection {
    PairSet pairs;
    SaeModel sae;
    LatentTable table;
    FeatureStats stats;
};

LoadedSelection load_and_score(const PipelineConfig& config) {
    const fs::path dump_dir = or_default(config.paths.dump, config.paths.out / "dump");
    const fs::path sae_dir = or_default(config.paths.sae, config.paths.out / "sae");
    PairSet pairs = read_dump(dump_dir);
    SaeModel sae = load_sae(sae_dir);
    if (pairs.hidden_size != sae.hidden_size()) {
        throw DataError("dump hidden_size " + std::to_string(pairs.hidden_size) + " does not match SAE hidden size " +
                        std::to_string(sae.hidden_size()));
    }
    LatentTable table = mean_latent_table(sae, pairs, config.n_pairs);
    FeatureStats stats = compute_feature_stats(table.positive, table.negative, config.selection);
    return {std::move(pairs), std::move(sae), std::move(table), std::move(stats)};
}

std::vector<float> random_shift(std::size_t h, std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, 0x5111F7));
    std::vector<float> s(h);
    for (auto& v : s) v = static_cast<float>(rng.normal());
    return s;
}

nlohmann::json events_json(const std::vector<InjectionEvent>& events) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < events.size(); ++i) {
        arr.push_back({{"step", i},
                       {"position", events[i].position},
                       {"norm_before", events[i].norm_before},
                       {"norm_after", events[i].norm_after},
                       {"cos_with_shift", events[i].cos_with_shift}});
    }
    return arr;
}

}  // namespace

std::span<const HyperparameterPreset> hyperparameter_presets() { return kPresets; }

const HyperparameterPreset& find_preset(std::string_view name) {
    for (const auto& p : kPresets) {
        if (p.name == name) return p;
    }
    throw UsageError("unknown preset '" + std::string(name) + "'");
}

void apply_preset(PipelineConfig& config, std::string_view name) {
    const auto& p = find_preset(name);
    config.preset = std::string(name);
    config.selection.theta = p.theta;
    config.selection.beta = p.beta;
    config.selection.k = p.k;
    config.steering.strength = p.strength;
    config.steering.layer = p.layer;
    config.steering_layer_set = true;
    config.eval.eval.shots = p.shots;
}

PipelineConfig parse_pipeline_config(const nlohmann::json& json) {
    if (!json.is_object()) throw UsageError("config: top level must be a JSON object");
    PipelineConfig c;
    try {
        read_field(json, "seed", c.seed);
        if (json.contains("preset") && !json["preset"].is_null()) apply_preset(c, json["preset"].get<std::string>());
        read_field(json, "n_pairs", c.n_pairs);
        if (json.contains("selection")) {
            const auto& s = json["selection"];
            read_field(s, "theta", c.selection.theta);
            read_field(s, "beta", c.selection.beta);
            read_field(s, "k", c.selection.k);
        }
        if (json.contains("steering")) {
            const auto& s = json["steering"];
            read_field(s, "strength", c.steering.strength);
            if (s.contains("layer")) {
                c.steering.layer = s["layer"].get<int>();
                c.steering_layer_set = true;
            }
            if (s.contains("injection_scope")) {
                c.steering.scope = parse_injection_scope(s["injection_scope"].get<std::string>());
            }
            read_field(s, "normalize", c.steering.normalize);
        }
        if (json.contains("paths")) {
            const auto& p = json["paths"];
            read_path(p, "dump", c.paths.dump);
            read_path(p, "sae", c.paths.sae);
            read_path(p, "out", c.paths.out);
            read_path(p, "report", c.paths.report);
            read_path(p, "vector", c.paths.vector);
            read_path(p, "dataset", c.paths.dataset);
            read_path(p, "outputs", c.paths.outputs);
            read_path(p, "ground_truth", c.paths.ground_truth);
        }
        c.synth.seed = c.seed;
        if (json.contains("synth")) {
            const auto& s = json["synth"];
            read_field(s, "n_pairs", c.synth.n_pairs);
            read_field(s, "features", c.synth.features);
            read_field(s, "hidden", c.synth.hidden);
            read_field(s, "planted", c.synth.planted);
            read_field(s, "planted_count", c.synth_planted_count);
            read_field(s, "shift", c.synth.shift);
            read_field(s, "noise_sigma", c.synth.noise_sigma);
            read_field(s, "seed", c.synth.seed);
            if (s.contains("sae_mode")) c.synth.sae_mode = parse_synth_sae_mode(s["sae_mode"].get<std::string>());
        }
        if (json.contains("toylm")) {
            const auto& t = json["toylm"];
            read_field(t, "vocab_size", c.toylm.vocab_size);
            read_field(t, "hidden_size", c.toylm.hidden_size);
            read_field(t, "layers", c.toylm.layers);
            read_field(t, "heads", c.toylm.heads);
            read_field(t, "context", c.toylm.context);
            read_field(t, "seed", c.toylm.seed);
        }
        if (json.contains("demo")) {
            const auto& d = json["demo"];
            read_field(d, "prompt", c.demo.prompt);
            read_field(d, "max_new", c.demo.max_new);
            read_field(d, "lambdas", c.demo.lambdas);
        }
        if (json.contains("ablate")) read_field(json["ablate"], "ranges", c.ranges);
        if (json.contains("eval")) {
            const auto& e = json["eval"];
            read_field(e, "shots", c.eval.eval.shots);
            if (e.contains("role_variant") && !e["role_variant"].is_null()) {
                c.eval.eval.role_variant = e["role_variant"].get<int>();
            }
            read_field(e, "max_new_tokens", c.eval.eval.max_new_tokens);
            read_field(e, "role_sweep", c.eval.role_sweep);
            read_field(e, "steer", c.eval.steer);
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.selection.validate();
    c.steering.validate();
    c.eval.eval.validate();
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open '" + path.string() + "'");
    nlohmann::json json;
    try {
        json = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config: invalid JSON in '" + path.string() + "': " + e.what());
    }
    return parse_pipeline_config(json);
}

void write_json(const fs::path& path, const nlohmann::json& json) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << json.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

std::vector<int> encode_text(std::string_view text) {
    std::vector<int> ids;
    ids.reserve(text.size());
    const auto unknown = static_cast<int>(kAlphabet.find('?'));
    for (char c : text) {
        const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const auto pos = kAlphabet.find(lc);
        ids.push_back(pos == std::string_view::npos ? unknown : static_cast<int>(pos));
    }
    return ids;
}

std::string decode_text(std::span<const int> tokens) {
    std::string out;
    for (int t : tokens) out.push_back(t >= 0 && t < 64 ? kAlphabet[static_cast<std::size_t>(t)] : '?');
    return out;
}

nlohmann::json cmd_synth(const PipelineConfig& config) {
    SynthSpec spec = config.synth;
    if (spec.planted.empty()) spec.planted = choose_planted(spec.features, config.synth_planted_count, spec.seed);
    const auto result = gen_pairs(spec);
    const fs::path out = config.paths.out;
    write_dump(result.pairs, out / "dump");
    save_sae(result.sae, out / "sae");
    write_json(out / "ground_truth.json", ground_truth_json(spec, result.ground_truth));

    auto report = header("synth");
    report["dump"] = (out / "dump").string();
    report["sae"] = (out / "sae").string();
    report["ground_truth"] = (out / "ground_truth.json").string();
    report["n_pairs"] = spec.n_pairs;
    report["features"] = spec.features;
    report["hidden"] = spec.hidden;
    report["planted"] = result.ground_truth;
    write_json(out / "synth.json", report);
    return report;
}

nlohmann::json cmd_select(const PipelineConfig& config) {
    const auto loaded = load_and_score(config);
    const auto selected = select_features(loaded.table.positive, loaded.stats, config.selection.k);

    auto report = header("select");
    report.update(selection_report(config.selection, loaded.stats, selected));
    report["preset"] = config.preset ? nlohmann::json(*config.preset) : nlohmann::json(nullptr);
    report["n_pairs_used"] = loaded.table.positive.rows;
    report["n_pairs_available"] = loaded.pairs.pairs.size();
    report["layer"] = loaded.pairs.layer;
    report["model_tag"] = loaded.pairs.model_tag;
    report["sae_tag"] = loaded.sae.source_tag();
    report["stopword_list"] = kStopwordListVersion;
    report["alpha_definition"] = "mean over positive samples of the masked per-sample mean latent";
    report["empty_mask_records"] = loaded.table.empty_mask_records;
    write_json(config.paths.out / "selection.json", report);
    return report;
}

nlohmann::json cmd_build(const PipelineConfig& config) {
    const fs::path report_path = or_default(config.paths.report, config.paths.out / "selection.json");
    const auto selection = read_json(report_path);
    SelectedFeatures selected;
    int layer = config.steering.layer;
    try {
        for (const auto& f : selection.at("features")) {
            selected.indices.push_back(f.at("id").get<std::size_t>());
            selected.alpha.push_back(f.at("alpha").get<double>());
        }
        if (!config.steering_layer_set && selection.contains("layer")) layer = selection["layer"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("selection report '" + report_path.string() + "': " + e.what());
    }
    const SaeModel sae = load_sae(or_default(config.paths.sae, config.paths.out / "sae"));
    SteeringVector vector = build_shift(sae, selected, layer);
    vector.default_strength = config.steering.strength;
    const fs::path vector_dir = or_default(config.paths.vector, config.paths.out / "vector");
    save_vector(vector, vector_dir);

    const SteeringVector reloaded = load_vector(vector_dir);
    const auto recomposed = recompose_shift(sae, reloaded.indices, reloaded.alpha);
    double max_err = 0.0;
    for (std::size_t j = 0; j < recomposed.size(); ++j) {
        max_err = std::max(max_err, static_cast<double>(std::abs(recomposed[j] - reloaded.shift[j])));
    }
    if (max_err > 1e-6) throw NumericalError("build: reloaded shift does not recompose from its components");

    auto report = header("build");
    report["vector"] = vector_dir.string();
    report["k"] = vector.indices.size();
    report["layer"] = vector.layer;
    report["lambda"] = shortest_double(vector.default_strength);
    report["shift_norm"] = l2_norm(vector.shift);
    report["recomposition_max_abs_error"] = max_err;
    write_json(config.paths.out / "build.json", report);
    return report;
}

nlohmann::json cmd_demo(const PipelineConfig& config) {
    const ToyLm lm(config.toylm);
    SteeringVector vector;
    const fs::path vector_dir = or_default(config.paths.vector, config.paths.out / "vector");
    const bool have_vector = fs::exists(vector_dir / "vector.json");
    if (have_vector) {
        vector = load_vector(vector_dir);
    } else {
        vector.shift = random_shift(config.toylm.hidden_size, config.seed);
        vector.layer = config.steering.layer;
        vector.sae_tag = "random";
    }
    SteeringConfig steer_cfg = config.steering;
    if (!config.steering_layer_set) steer_cfg.layer = vector.layer;

    const auto baseline = generate(lm, config.demo.prompt, config.demo.max_new);
    auto runs = nlohmann::json::array();
    for (float lambda : config.demo.lambdas) {
        steer_cfg.strength = lambda;
        const Steering steer{&vector, steer_cfg};
        const auto steered = generate(lm, config.demo.prompt, config.demo.max_new, &steer);
        nlohmann::json divergence = nullptr;
        for (std::size_t i = config.demo.prompt.size(); i < steered.tokens.size(); ++i) {
            if (steered.tokens[i] != baseline.tokens[i]) {
                divergence = i - config.demo.prompt.size();
                break;
            }
        }
        runs.push_back({{"lambda", shortest_double(lambda)},
                        {"tokens", steered.tokens},
                        {"identical_to_unsteered", steered.tokens == baseline.tokens},
                        {"divergence_step", divergence},
                        {"injections", events_json(steered.injections)}});
    }
    auto report = header("demo");
    report["vector_source"] = have_vector ? vector_dir.string() : std::string("random");
    report["layer"] = steer_cfg.layer;
    report["injection_scope"] = to_string(steer_cfg.scope);
    report["normalize"] = steer_cfg.normalize;
    report["toylm_seed"] = config.toylm.seed;
    report["prompt"] = config.demo.prompt;
    report["unsteered"] = baseline.tokens;
    report["runs"] = std::move(runs);
    write_json(config.paths.out / "demo.json", report);
    return report;
}

nlohmann::json cmd_ablate(const PipelineConfig& config) {
    if (config.ranges.empty()) throw UsageError("ablate: no ranking ranges given");
    const auto loaded = load_and_score(config);
    const std::size_t d = loaded.stats.score.size();
    for (const auto& [start, end] : config.ranges) {
        if (start < 1 || start > end || end > d) {
            throw UsageError("ablate: invalid range " + std::to_string(start) + "-" + std::to_string(end) + " for " +
                             std::to_string(d) + " features");
        }
    }
    fs::path truth_path = config.paths.ground_truth;
    if (truth_path.empty() && fs::exists(config.paths.out / "ground_truth.json")) {
        truth_path = config.paths.out / "ground_truth.json";
    }
    std::optional<std::vector<std::size_t>> truth;
    if (!truth_path.empty()) truth = read_ground_truth(truth_path);

    auto rows = nlohmann::json::array();
    std::vector<double> precisions;
    for (const auto& [start, end] : config.ranges) {
        const auto ids = rank_range(loaded.stats.score, start, end);
        nlohmann::json row = {{"start", start}, {"end", end}, {"features", ids}};
        std::vector<double> scores;
        for (auto id : ids) scores.push_back(loaded.stats.score[id]);
        row["scores"] = scores;
        if (truth) {
            precisions.push_back(recovery_precision(ids, *truth));
            row["recovery_precision"] = precisions.back();
        }
        rows.push_back(std::move(row));
    }
    auto report = header("ablate");
    report["theta"] = shortest_double(config.selection.theta);
    report["beta"] = shortest_double(config.selection.beta);
    report["ranges"] = std::move(rows);
    if (truth) {
        report["precision_monotone_non_increasing"] =
            std::is_sorted(precisions.begin(), precisions.end(), std::greater<>());
    }
    write_json(config.paths.out / "ablation.json", report);
    return report;
}

nlohmann::json cmd_eval(const PipelineConfig& config) {
    if (config.paths.dataset.empty()) throw UsageError("eval: no dataset given");
    const auto items = load_dataset(config.paths.dataset);
    if (items.empty()) throw DataError("eval: dataset '" + config.paths.dataset.string() + "' is empty");
    EvalConfig eval = config.eval.eval;
    eval.validate();
    const ExtractMode mode = eval.shots > 0 ? ExtractMode::shot : ExtractMode::zero_shot;

    std::vector<std::optional<int>> variants;
    if (config.eval.role_sweep) {
        for (int v = 0; v < 5; ++v) variants.emplace_back(v);
    } else {
        variants.push_back(eval.role_variant);
    }

    // Precomputed outputs keyed by (variant or -1, item index).
    std::map<std::pair<int, std::size_t>, std::string> outputs;
    const bool use_outputs = !config.paths.outputs.empty();
    if (use_outputs) {
        std::ifstream in(config.paths.outputs);
        if (!in) throw DataError("eval: cannot open outputs '" + config.paths.outputs.string() + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                const int variant = j.contains("variant") && !j["variant"].is_null() ? j["variant"].get<int>() : -1;
                outputs[{variant, j.at("index").get<std::size_t>()}] = j.at("output").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw DataError("eval outputs line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    std::optional<ToyLm> lm;
    std::optional<SteeringVector> vector;
    if (!use_outputs) {
        lm.emplace(config.toylm);
        if (eval.max_new_tokens >= config.toylm.context) {
            throw UsageError("eval: max_new_tokens must be smaller than the toy model context");
        }
        if (config.eval.steer) vector = load_vector(or_default(config.paths.vector, config.paths.out / "vector"));
    }

    auto runs = nlohmann::json::array();
    std::vector<double> accuracies;
    for (const auto& variant : variants) {
        EvalConfig run_cfg = eval;
        run_cfg.role_variant = variant;
        std::vector<std::optional<std::string>> predictions;
        auto per_item = nlohmann::json::array();
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& item = items[i];
            std::optional<std::string> text;
            if (use_outputs) {
                auto it = outputs.find({variant.value_or(-1), i});
                if (it != outputs.end()) text = it->second;
            } else {
                const auto& roles = role_prompts(domain_for(item.kind));
                const auto prompt = assemble_prompt(item, run_cfg, &roles);
                auto ids = encode_text(prompt);
                const std::size_t budget = config.toylm.context - eval.max_new_tokens;
                if (ids.size() > budget) ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(budget));
                SteeringConfig sc = config.steering;
                if (vector && !config.steering_layer_set) sc.layer = vector->layer;
                const Steering steer{vector ? &*vector : nullptr, sc};
                const auto gen = generate(*lm, ids, eval.max_new_tokens, vector ? &steer : nullptr);
                text = decode_text(std::span<const int>(gen.tokens).subspan(ids.size()));
            }
            auto prediction = text ? extract_answer(*text, item.kind, mode) : std::nullopt;
            const bool correct = answer_matches(item, prediction);
            per_item.push_back({{"index", i},
                                {"gold", item.gold},
                                {"prediction", prediction ? nlohmann::json(*prediction) : nlohmann::json(nullptr)},
                                {"correct", correct}});
            predictions.push_back(std::move(prediction));
        }
        const double acc = score(items, predictions);
        accuracies.push_back(acc);
        runs.push_back({{"role_variant", variant ? nlohmann::json(*variant) : nlohmann::json(nullptr)},
                        {"accuracy", acc},
                        {"items", std::move(per_item)}});
    }

    auto report = header("eval");
    report["dataset"] = config.paths.dataset.string();
    report["n_items"] = items.size();
    report["shots"] = eval.shots;
    report["source"] = use_outputs ? "outputs" : "toylm";
    report["steered"] = vector.has_value();
    report["runs"] = std::move(runs);
    if (accuracies.size() == 5) {
        std::vector<double> percent;
        for (double a : accuracies) percent.push_back(100.0 * a);
        const auto stats = prompt_variance(percent);
        report["variance"] = {{"accuracies_percent", percent}, {"mean", stats.mean}, {"std", stats.stddev}};
    }
    write_json(config.paths.out / "eval.json", report);
    return report;
}

nlohmann::json cmd_report(const PipelineConfig& config, std::span<const fs::path> inputs,
                          std::span<const double> accuracies) {
    if (inputs.empty() && accuracies.empty()) throw UsageError("report: give --inputs and/or --accuracies");
    auto report = header("report");
    auto collected = nlohmann::json::array();
    for (const auto& path : inputs) {
        auto j = read_json(path);
        if (!j.contains("schema_version")) throw DataError("report: '" + path.string() + "' has no schema_version");
        collected.push_back({{"file", path.string()}, {"report", std::move(j)}});
    }
    report["inputs"] = std::move(collected);
    if (!accuracies.empty()) {
        const auto stats = prompt_variance(accuracies);
        report["variance"] = {{"accuracies", std::vector<double>(accuracies.begin(), accuracies.end())},
                              {"mean", stats.mean},
                              {"std", stats.stddev}};
    }
    write_json(config.paths.out / "report.json", report);
    return report;
}

}  // namespace rolesteer

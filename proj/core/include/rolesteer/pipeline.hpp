#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rolesteer/evalharness.hpp"
#include "rolesteer/selection.hpp"
#include "rolesteer/steering.hpp"
#include "rolesteer/synth.hpp"
#include "rolesteer/toylm.hpp"

namespace rolesteer {

inline constexpr int kReportSchemaVersion = 1;

// Steering hyperparameters for one model, dataset and shot count.
struct HyperparameterPreset {
    std::string_view name;  // "<model>-<dataset>-<shots>shot", e.g. "llama31-gsm8k-4shot"
    std::string_view model;
    std::string_view dataset;
    int shots;
    float theta;
    float beta;
    float strength;
    int layer;
    std::size_t k;
};

std::span<const HyperparameterPreset> hyperparameter_presets();
const HyperparameterPreset& find_preset(std::string_view name);

struct PipelinePaths {
    std::filesystem::path dump;
    std::filesystem::path sae;
    std::filesystem::path out = ".";
    std::filesystem::path report;        // selection report consumed by build
    std::filesystem::path vector;        // steering vector directory
    std::filesystem::path dataset;       // eval JSONL
    std::filesystem::path outputs;       // precomputed model outputs for eval
    std::filesystem::path ground_truth;  // synth ground truth for ablate
};

struct DemoConfig {
    std::vector<int> prompt = {1, 2, 3};
    std::size_t max_new = 16;
    std::vector<float> lambdas = {0.0f, 4.0f, 16.0f};
};

struct EvalRunConfig {
    EvalConfig eval;
    bool role_sweep = false;  // evaluate all five role variants and report their spread
    bool steer = false;       // steer the toy model with the configured vector
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::size_t n_pairs = 1000;
    std::optional<std::string> preset;
    SelectionConfig selection;
    SteeringConfig steering{1.0f, 0, InjectionScope::every_step_last_token, true};
    bool steering_layer_set = false;
    PipelinePaths paths;
    SynthSpec synth;
    std::size_t synth_planted_count = 15;
    ToyLmConfig toylm;
    DemoConfig demo;
    std::vector<std::pair<std::size_t, std::size_t>> ranges = {{1, 15}, {6, 20}, {11, 25}, {16, 30}};
    EvalRunConfig eval;
};

// Defaults, then the preset named in the JSON (if any), then explicit JSON fields.
PipelineConfig parse_pipeline_config(const nlohmann::json& json);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void apply_preset(PipelineConfig& config, std::string_view name);

// Each command writes its outputs under paths.out and returns the JSON report
// it wrote (every report carries "schema_version" and "command").
nlohmann::json cmd_synth(const PipelineConfig& config);
nlohmann::json cmd_select(const PipelineConfig& config);
nlohmann::json cmd_build(const PipelineConfig& config);
nlohmann::json cmd_demo(const PipelineConfig& config);
nlohmann::json cmd_ablate(const PipelineConfig& config);
nlohmann::json cmd_eval(const PipelineConfig& config);
nlohmann::json cmd_report(const PipelineConfig& config, std::span<const std::filesystem::path> inputs,
                          std::span<const double> accuracies);

// Fixed 64-symbol character codec used to drive the toy model with text.
std::vector<int> encode_text(std::string_view text);
std::string decode_text(std::span<const int> tokens);

void write_json(const std::filesystem::path& path, const nlohmann::json& json);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace rolesteer

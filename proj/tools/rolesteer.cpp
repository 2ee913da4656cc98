// Command line front end for the role-steering pipeline.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rolesteer/error.hpp"
#include "rolesteer/pipeline.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> preset;
    std::optional<std::size_t> n_pairs;
    std::optional<float> theta;
    std::optional<float> beta;
    std::optional<std::size_t> k;
    std::optional<float> lambda;
    std::optional<int> layer;
    std::optional<std::string> scope;
    std::optional<std::string> dump;
    std::optional<std::string> sae;
    std::optional<std::string> report;
    std::optional<std::string> vector;
    std::optional<std::string> dataset;
    std::optional<std::string> outputs;
    std::optional<std::string> ground_truth;
    std::optional<int> shots;
    std::optional<int> role_variant;
    bool role_sweep = false;
    bool steer = false;
    std::vector<std::string> ranges;
    std::vector<std::string> inputs;
    std::vector<double> accuracies;
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) throw rolesteer::UsageError("range '" + text + "' must look like START-END");
    try {
        return {std::stoul(text.substr(0, dash)), std::stoul(text.substr(dash + 1))};
    } catch (const std::exception&) {
        throw rolesteer::UsageError("range '" + text + "' must look like START-END");
    }
}

rolesteer::PipelineConfig resolve(const Overrides& o) {
    using namespace rolesteer;
    PipelineConfig c = o.config.empty() ? parse_pipeline_config(nlohmann::json::object())
                                        : load_pipeline_config(o.config);
    if (o.preset) apply_preset(c, *o.preset);
    if (o.seed) {
        c.seed = *o.seed;
        c.synth.seed = *o.seed;
    }
    if (o.out) c.paths.out = *o.out;
    if (o.n_pairs) c.n_pairs = *o.n_pairs;
    if (o.theta) c.selection.theta = *o.theta;
    if (o.beta) c.selection.beta = *o.beta;
    if (o.k) c.selection.k = *o.k;
    if (o.lambda) c.steering.strength = *o.lambda;
    if (o.layer) {
        c.steering.layer = *o.layer;
        c.steering_layer_set = true;
    }
    if (o.scope) c.steering.scope = parse_injection_scope(*o.scope);
    if (o.dump) c.paths.dump = *o.dump;
    if (o.sae) c.paths.sae = *o.sae;
    if (o.report) c.paths.report = *o.report;
    if (o.vector) c.paths.vector = *o.vector;
    if (o.dataset) c.paths.dataset = *o.dataset;
    if (o.outputs) c.paths.outputs = *o.outputs;
    if (o.ground_truth) c.paths.ground_truth = *o.ground_truth;
    if (o.shots) c.eval.eval.shots = *o.shots;
    if (o.role_variant) c.eval.eval.role_variant = *o.role_variant;
    if (o.role_sweep) c.eval.role_sweep = true;
    if (o.steer) c.eval.steer = true;
    if (!o.ranges.empty()) {
        c.ranges.clear();
        for (const auto& r : o.ranges) c.ranges.push_back(parse_range(r));
    }
    c.selection.validate();
    c.steering.validate();
    c.eval.eval.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAE-based role-play steering pipeline"};
    app.require_subcommand(1);
    Overrides o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Global seed");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--preset", o.preset, "Hyperparameter preset, e.g. llama31-gsm8k-4shot");
    };
    auto selection = [&](CLI::App* sub) {
        sub->add_option("--dump", o.dump, "Activation dump directory");
        sub->add_option("--sae", o.sae, "SAE bundle directory");
        sub->add_option("--n-pairs", o.n_pairs, "Number of pairs to use");
        sub->add_option("--theta", o.theta, "Activation frequency threshold");
        sub->add_option("--beta", o.beta, "Frequency weight in the sensitivity score");
        sub->add_option("--k", o.k, "Number of selected features");
    };
    auto steering = [&](CLI::App* sub) {
        sub->add_option("--vector", o.vector, "Steering vector directory");
        sub->add_option("--lambda", o.lambda, "Steering strength");
        sub->add_option("--layer", o.layer, "Injection layer");
        sub->add_option("--scope", o.scope, "every_step_last_token or prefill_only");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dump, SAE and ground truth");
    common(synth);

    auto* select = app.add_subcommand("select", "Score SAE features and select the top k");
    common(select);
    selection(select);

    auto* build = app.add_subcommand("build", "Build a steering vector from a selection report");
    common(build);
    build->add_option("--sae", o.sae, "SAE bundle directory");
    build->add_option("--report", o.report, "Selection report");
    steering(build);

    auto* demo = app.add_subcommand("demo", "Compare steered and unsteered toy model generations");
    common(demo);
    steering(demo);

    auto* ablate = app.add_subcommand("ablate", "Select features over several ranking ranges");
    common(ablate);
    selection(ablate);
    ablate->add_option("--range", o.ranges, "Ranking range START-END (1-based, inclusive); repeatable");
    ablate->add_option("--ground-truth", o.ground_truth, "Synthetic ground truth JSON");

    auto* eval = app.add_subcommand("eval", "Score reasoning outputs");
    common(eval);
    steering(eval);
    eval->add_option("--dataset", o.dataset, "Dataset JSONL");
    eval->add_option("--outputs", o.outputs, "Precomputed model outputs JSONL");
    eval->add_option("--shots", o.shots, "0, 1 or 4");
    eval->add_option("--role-variant", o.role_variant, "Role prompt variant 0-4");
    eval->add_flag("--role-sweep", o.role_sweep, "Evaluate all five role variants");
    eval->add_flag("--steer", o.steer, "Steer the toy model with --vector");

    auto* report = app.add_subcommand("report", "Collect reports and accuracy statistics");
    common(report);
    report->add_option("--inputs", o.inputs, "Report JSON files");
    report->add_option("--accuracies", o.accuracies, "Five accuracies for the variance block");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto config = resolve(o);
        nlohmann::json result;
        if (synth->parsed()) result = rolesteer::cmd_synth(config);
        else if (select->parsed()) result = rolesteer::cmd_select(config);
        else if (build->parsed()) result = rolesteer::cmd_build(config);
        else if (demo->parsed()) result = rolesteer::cmd_demo(config);
        else if (ablate->parsed()) result = rolesteer::cmd_ablate(config);
        else if (eval->parsed()) result = rolesteer::cmd_eval(config);
        else {
            std::vector<std::filesystem::path> inputs(o.inputs.begin(), o.inputs.end());
            result = rolesteer::cmd_report(config, inputs, o.accuracies);
        }
        std::cout << result.dump(2) << '\n';
        return 0;
    } catch (const rolesteer::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rolesteer {

enum class ReasoningDomain { arithmetic, commonsense };
enum class AnswerKind { numeric, option };

std::string_view to_string(ReasoningDomain domain);
ReasoningDomain parse_domain(std::string_view text);
std::string_view to_string(AnswerKind kind);
AnswerKind parse_answer_kind(std::string_view text);
ReasoningDomain domain_for(AnswerKind kind);

struct RolePromptSet {
    ReasoningDomain domain = ReasoningDomain::arithmetic;
    std::array<std::string, 5> variants;
    std::string transition;  // inserted between the role text and the task

    void validate() const;
};

// Embedded role prompts (five variants per domain).
const RolePromptSet& role_prompts(ReasoningDomain domain);

struct Exemplar {
    std::string_view question;
    std::string_view answer;  // chain of thought
    std::string_view output;  // final answer as printed after "Output:"
};

// Embedded chain-of-thought exemplars. one_shot has one entry, few_shot four.
std::span<const Exemplar> one_shot_exemplars(ReasoningDomain domain);
std::span<const Exemplar> few_shot_exemplars(ReasoningDomain domain);

struct EvalItem {
    std::string question;
    std::string gold;
    AnswerKind kind = AnswerKind::numeric;

    void validate() const;
};

struct EvalConfig {
    int shots = 0;  // 0, 1 or 4
    std::optional<int> role_variant;
    std::size_t max_new_tokens = 150;

    void validate() const;
};

// Prompt layout (byte-exact, "\n" line breaks):
//
//   [<role variant><transition>\n\n]          when role_variant is set
//   [Q: <q>\nA: <cot>\nOutput: <out>\n\n]...  1 or 4 exemplars when shots > 0
//   Q: <question>\nA: Let's think step by step.
//
// When the transition is non-empty it is joined to the role text by a single space.
std::string assemble_prompt(const EvalItem& item, const EvalConfig& config, const RolePromptSet* roles);

enum class ExtractMode {
    automatic,  // shot path when the text contains "Output:", else zero-shot path
    shot,
    zero_shot,
};

// Shot path: first answer-shaped token after the last "Output:". Zero-shot
// path: the number after the last "answer is" cue, else the last number
// (numeric); the last option mention (option). Returns nullopt when nothing
// matches. Never throws.
std::optional<std::string> extract_answer(std::string_view output, AnswerKind kind,
                                          ExtractMode mode = ExtractMode::automatic);

// Normalizes a numeric answer: strips "$", ",", "%" and trailing punctuation
// and parses. nullopt when it is not a number.
std::optional<double> parse_numeric_answer(std::string_view text);

bool answer_matches(const EvalItem& item, const std::optional<std::string>& prediction);

// Fraction of correct predictions; a missing prediction is incorrect.
double score(std::span<const EvalItem> items, std::span<const std::optional<std::string>> predictions);

struct VarianceStats {
    double mean = 0.0;
    double stddev = 0.0;  // population (divide by n)
};

// Mean and population standard deviation over exactly five accuracies.
VarianceStats prompt_variance(std::span<const double> accuracies);

// JSON lines: {"question": ..., "gold": ..., "kind": "numeric"|"option"}.
std::vector<EvalItem> load_dataset(const std::filesystem::path& path);

}  // namespace rolesteer

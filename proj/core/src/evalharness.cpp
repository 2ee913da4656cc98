#include "rolesteer/evalharness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rolesteer/error.hpp"

namespace rolesteer {

namespace {

constexpr std::string_view kOutputMarker = "Output:";
constexpr std::string_view kCotTrigger = "Let's think step by step.";

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_option_letter(char c) { return (c >= 'a' && c <= 'e') || (c >= 'A' && c <= 'E'); }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

struct NumberMatch {
    std::size_t begin;
    std::string normalized;
};

// Numbers in order of appearance. Accepts "1,234.5", "$12", "-3"; a minus sign
// counts only at the start of the text or after whitespace, "(", "$" or "=".
std::vector<NumberMatch> find_numbers(std::string_view text) {
    std::vector<NumberMatch> found;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i]) || (i > 0 && (is_digit(text[i - 1]) || is_alpha(text[i - 1])))) {
            ++i;
            continue;
        }
        // Skip digits glued to a preceding decimal point of an earlier number.
        if (i > 1 && text[i - 1] == '.' && is_digit(text[i - 2])) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        std::string digits;
        std::size_t j = i;
        while (j < text.size()) {
            if (is_digit(text[j])) {
                digits.push_back(text[j++]);
            } else if (text[j] == ',' && j + 3 < text.size() && is_digit(text[j + 1]) && is_digit(text[j + 2]) &&
                       is_digit(text[j + 3]) && (j + 4 >= text.size() || !is_digit(text[j + 4]))) {
                ++j;  // thousands separator
            } else {
                break;
            }
        }
        if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
            digits.push_back('.');
            ++j;
            while (j < text.size() && is_digit(text[j])) digits.push_back(text[j++]);
        }
        std::size_t sign_pos = begin;
        if (sign_pos > 0 && text[sign_pos - 1] == '$') --sign_pos;
        if (sign_pos > 0 && text[sign_pos - 1] == '-') {
            const bool standalone = sign_pos == 1 || is_space(text[sign_pos - 2]) || text[sign_pos - 2] == '(' ||
                                    text[sign_pos - 2] == '=' || text[sign_pos - 2] == '$';
            if (standalone) {
                digits.insert(digits.begin(), '-');
                begin = sign_pos - 1;
            }
        }
        found.push_back({begin, digits});
        i = j;
    }
    return found;
}

struct OptionMatch {
    std::size_t begin;
    char letter;
};

std::vector<OptionMatch> parenthesized_options(std::string_view text) {
    std::vector<OptionMatch> found;
    for (std::size_t i = 0; i + 2 < text.size(); ++i) {
        if (text[i] == '(' && is_option_letter(text[i + 1]) && text[i + 2] == ')') found.push_back({i, lower(text[i + 1])});
    }
    return found;
}

bool standalone_letter_at(std::string_view text, std::size_t i) {
    if (!is_option_letter(text[i])) return false;
    if (i > 0 && (is_alpha(text[i - 1]) || is_digit(text[i - 1]) || text[i - 1] == '\'')) return false;
    if (i + 1 < text.size() && (is_alpha(text[i + 1]) || is_digit(text[i + 1]) || text[i + 1] == '\'')) return false;
    return true;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = lower(c);
    return out;
}

// Last "answer is X" / "answer: X" / "option X" / "choice X" mention.
std::optional<char> cued_option(std::string_view text) {
    const std::string low = ascii_lower(text);
    std::optional<OptionMatch> best;
    for (std::string_view cue : {"answer is", "answer:", "option", "choice"}) {
        std::size_t pos = 0;
        while ((pos = low.find(cue, pos)) != std::string::npos) {
            std::size_t j = pos + cue.size();
            while (j < low.size() && (is_space(low[j]) || low[j] == ':')) ++j;
            if (j < low.size() && low[j] == '(') ++j;
            if (j < low.size() && standalone_letter_at(low, j)) {
                if (!best || pos > best->begin) best = OptionMatch{pos, low[j]};
            }
            pos += cue.size();
        }
    }
    if (best) return best->letter;
    return std::nullopt;
}

std::optional<std::string> extract_shot(std::string_view output, AnswerKind kind) {
    const auto marker = output.rfind(kOutputMarker);
    if (marker == std::string_view::npos) return std::nullopt;
    std::string_view rest = output.substr(marker + kOutputMarker.size());
    // The answer is on the marker line, or on the next non-blank line.
    std::size_t start = 0;
    while (start < rest.size() && is_space(rest[start])) ++start;
    rest = rest.substr(start);
    rest = rest.substr(0, rest.find('\n'));
    if (kind == AnswerKind::numeric) {
        const auto numbers = find_numbers(rest);
        if (numbers.empty()) return std::nullopt;
        return numbers.front().normalized;
    }
    const auto parens = parenthesized_options(rest);
    if (!parens.empty()) return std::string(1, parens.front().letter);
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (standalone_letter_at(rest, i)) return std::string(1, lower(rest[i]));
    }
    return std::nullopt;
}

// First number after the last "answer is" / "answer:" / "answer =" cue.
std::optional<std::string> cued_number(std::string_view text) {
    const std::string low = ascii_lower(text);
    std::size_t best = std::string::npos;
    std::size_t best_end = 0;
    for (std::string_view cue : {"answer is", "answer:", "answer ="}) {
        const auto pos = low.rfind(cue);
        if (pos != std::string::npos && (best == std::string::npos || pos > best)) {
            best = pos;
            best_end = pos + cue.size();
        }
    }
    if (best == std::string::npos) return std::nullopt;
    const auto numbers = find_numbers(text.substr(best_end));
    if (numbers.empty()) return std::nullopt;
    return numbers.front().normalized;
}

std::optional<std::string> extract_zero_shot(std::string_view output, AnswerKind kind) {
    if (kind == AnswerKind::numeric) {
        if (auto cued = cued_number(output)) return cued;
        const auto numbers = find_numbers(output);
        if (numbers.empty()) return std::nullopt;
        return numbers.back().normalized;
    }
    const auto parens = parenthesized_options(output);
    if (!parens.empty()) return std::string(1, parens.back().letter);
    if (auto cued = cued_option(output)) return std::string(1, *cued);
    // Bare capital letter, unless it reads as the article "A" ("A cabinet").
    for (std::size_t i = output.size(); i-- > 0;) {
        const char c = output[i];
        if (c < 'A' || c > 'E' || !standalone_letter_at(output, i)) continue;
        if (c == 'A' && i + 2 < output.size() && output[i + 1] == ' ' && is_alpha(output[i + 2]) &&
            std::islower(static_cast<unsigned char>(output[i + 2]))) {
            continue;
        }
        return std::string(1, lower(c));
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(ReasoningDomain domain) {
    return domain == ReasoningDomain::arithmetic ? "arithmetic" : "commonsense";
}

ReasoningDomain parse_domain(std::string_view text) {
    if (text == "arithmetic") return ReasoningDomain::arithmetic;
    if (text == "commonsense") return ReasoningDomain::commonsense;
    throw UsageError("unknown domain '" + std::string(text) + "'");
}

std::string_view to_string(AnswerKind kind) { return kind == AnswerKind::numeric ? "numeric" : "option"; }

AnswerKind parse_answer_kind(std::string_view text) {
    if (text == "numeric") return AnswerKind::numeric;
    if (text == "option") return AnswerKind::option;
    throw DataError("unknown answer kind '" + std::string(text) + "'");
}

ReasoningDomain domain_for(AnswerKind kind) {
    return kind == AnswerKind::numeric ? ReasoningDomain::arithmetic : ReasoningDomain::commonsense;
}

void RolePromptSet::validate() const {
    for (const auto& v : variants) {
        if (v.empty()) throw UsageError("role prompt set has an empty variant");
    }
}

void EvalItem::validate() const {
    if (kind == AnswerKind::numeric) {
        if (!parse_numeric_answer(gold)) throw DataError("eval item gold '" + gold + "' is not a number");
    } else if (gold.size() != 1 || gold[0] < 'a' || gold[0] > 'e') {
        throw DataError("eval item gold '" + gold + "' is not an option letter a-e");
    }
}

void EvalConfig::validate() const {
    if (shots != 0 && shots != 1 && shots != 4) throw UsageError("eval: shots must be 0, 1 or 4");
    if (role_variant && (*role_variant < 0 || *role_variant >= 5)) throw UsageError("eval: role_variant must be in [0, 5)");
}

std::string assemble_prompt(const EvalItem& item, const EvalConfig& config, const RolePromptSet* roles) {
    config.validate();
    std::string prompt;
    if (config.role_variant) {
        if (!roles) throw UsageError("assemble_prompt: role variant requested without a role prompt set");
        roles->validate();
        prompt += roles->variants[static_cast<std::size_t>(*config.role_variant)];
        if (!roles->transition.empty()) {
            prompt += ' ';
            prompt += roles->transition;
        }
        prompt += "\n\n";
    }
    if (config.shots > 0) {
        const auto domain = domain_for(item.kind);
        const auto exemplars = config.shots == 1 ? one_shot_exemplars(domain) : few_shot_exemplars(domain);
        for (const auto& ex : exemplars) {
            prompt += "Q: ";
            prompt += ex.question;
            prompt += "\nA: ";
            prompt += ex.answer;
            prompt += "\nOutput: ";
            prompt += ex.output;
            prompt += "\n\n";
        }
    }
    prompt += "Q: ";
    prompt += item.question;
    prompt += "\nA: ";
    prompt += kCotTrigger;
    return prompt;
}

std::optional<std::string> extract_answer(std::string_view output, AnswerKind kind, ExtractMode mode) {
    if (mode == ExtractMode::automatic) {
        mode = output.find(kOutputMarker) != std::string_view::npos ? ExtractMode::shot : ExtractMode::zero_shot;
    }
    return mode == ExtractMode::shot ? extract_shot(output, kind) : extract_zero_shot(output, kind);
}

std::optional<double> parse_numeric_answer(std::string_view text) {
    std::string cleaned;
    for (char c : text) {
        if (c == '$' || c == ',' || c == '%' || is_space(c)) continue;
        cleaned.push_back(c);
    }
    while (!cleaned.empty() && (cleaned.back() == '.' || cleaned.back() == '!' || cleaned.back() == '?' ||
                                cleaned.back() == ';' || cleaned.back() == ':')) {
        cleaned.pop_back();
    }
    if (cleaned.empty()) return std::nullopt;
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(cleaned, &consumed);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (consumed != cleaned.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

bool answer_matches(const EvalItem& item, const std::optional<std::string>& prediction) {
    if (!prediction) return false;
    if (item.kind == AnswerKind::numeric) {
        const auto p = parse_numeric_answer(*prediction);
        const auto g = parse_numeric_answer(item.gold);
        return p && g && std::abs(*p - *g) <= 1e-6;
    }
    std::string p = ascii_lower(*prediction);
    std::erase_if(p, [](char c) { return c == '(' || c == ')' || is_space(c); });
    return p == ascii_lower(item.gold);
}

double score(std::span<const EvalItem> items, std::span<const std::optional<std::string>> predictions) {
    if (items.size() != predictions.size()) {
        throw UsageError("score: " + std::to_string(items.size()) + " items but " +
                         std::to_string(predictions.size()) + " predictions");
    }
    if (items.empty()) throw UsageError("score: no items");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < items.size(); ++i) correct += answer_matches(items[i], predictions[i]) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

VarianceStats prompt_variance(std::span<const double> accuracies) {
    if (accuracies.size() != 5) {
        throw UsageError("prompt_variance: expected 5 accuracies, got " + std::to_string(accuracies.size()));
    }
    double sum = 0.0;
    for (double a : accuracies) sum += a;
    const double mean = sum / 5.0;
    double sq = 0.0;
    for (double a : accuracies) sq += (a - mean) * (a - mean);
    return {mean, std::sqrt(sq / 5.0)};
}

std::vector<EvalItem> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("dataset: cannot open '" + path.string() + "'");
    std::vector<EvalItem> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), is_space)) continue;
        const std::string where = "dataset line " + std::to_string(line_no) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + "invalid JSON: " + e.what());
        }
        EvalItem item;
        try {
            item.question = j.at("question").get<std::string>();
            item.kind = parse_answer_kind(j.at("kind").get<std::string>());
            const auto& gold = j.at("gold");
            item.gold = gold.is_string() ? gold.get<std::string>() : gold.dump();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + "schema violation: " + e.what());
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        try {
            item.validate();
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace rolesteer

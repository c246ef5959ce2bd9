#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "ptmap/providers.hpp"
#include "ptmap/text.hpp"

namespace ptmap::prompts {

// Placeholders: {campaign}, {summary}, {pt}, {pts}.

inline constexpr std::string_view kInterpret =
    "You are analysing an e-commerce marketing campaign.\n"
    "Campaign: {campaign}\n"
    "Write a short semantic summary of the products this campaign promotes, "
    "including implicit product intent that the text does not name directly.";

inline constexpr std::string_view kClassify =
    "Campaign summary: {summary}\n"
    "Product type: {pt}\n"
    "Is this product type promoted by the campaign? "
    "Answer with exactly one word: STRONG, WEAK, or IRRELEVANT.";

inline constexpr std::string_view kClassifyBatch =
    "Campaign summary: {summary}\n"
    "Product types:\n{pts}\n"
    "For each product type, in order, answer on its own line with exactly one word: "
    "STRONG, WEAK, or IRRELEVANT.";

inline constexpr std::string_view kJudge =
    "Campaign: {campaign}\n"
    "Product type: {pt}\n"
    "Judge how relevant this product type is to the campaign's intent. "
    "Answer with exactly one word: STRONG, WEAK, or IRRELEVANT.";

inline constexpr std::string_view kJudgeSet =
    "Campaign: {campaign}\n"
    "Predicted product types:\n{pts}\n"
    "Rate from 0 to 1 how well this set of product types matches the campaign's intent. "
    "Answer with a single number.";

inline constexpr std::string_view kSelect =
    "Campaign: {campaign}\n"
    "Product types (id: text):\n{pts}\n"
    "Select the product types this campaign promotes. "
    "Answer with a JSON array of ids and nothing else.";

/// Prompt templates for each role, overridable from configuration.
struct Templates {
    std::string interpret{kInterpret};
    std::string classify{kClassify};
    std::string classify_batch{kClassifyBatch};
    std::string judge{kJudge};
    std::string judge_set{kJudgeSet};
    std::string select{kSelect};

    /// Applies overrides keyed by role name. Unknown keys are rejected by the
    /// config loader, not here.
    void apply(const std::map<std::string, std::string>& overrides)
    {
        for (const auto& [role, tmpl] : overrides) {
            if (role == "interpret") {
                interpret = tmpl;
            } else if (role == "classify") {
                classify = tmpl;
            } else if (role == "classify_batch") {
                classify_batch = tmpl;
            } else if (role == "judge") {
                judge = tmpl;
            } else if (role == "judge_set") {
                judge_set = tmpl;
            } else if (role == "select") {
                select = tmpl;
            }
        }
    }
};

inline bool is_role(std::string_view role)
{
    return role == "interpret" || role == "classify" || role == "classify_batch" || role == "judge"
        || role == "judge_set" || role == "select";
}

inline std::string numbered_list(std::span<const std::string> items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += std::to_string(i + 1) + ". " + items[i] + "\n";
    }
    if (!out.empty()) {
        out.pop_back();
    }
    return out;
}

inline std::string choice_list(std::span<const PtChoice> chunk)
{
    std::string out;
    for (const auto& c : chunk) {
        out += c.id + ": " + c.text + "\n";
    }
    if (!out.empty()) {
        out.pop_back();
    }
    return out;
}

inline std::string render(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string>> values)
{
    return text::substitute(tmpl, values);
}

}  // namespace ptmap::prompts

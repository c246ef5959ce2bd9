#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ptmap/jsonl.hpp"
#include "ptmap/providers.hpp"
#include "ptmap/taxonomy.hpp"
#include "ptmap/text.hpp"

namespace ptmap::mock {

/// Synonym lexicon driving the mock interpreter: token -> expansion phrases.
class Lexicon {
  public:
    Lexicon() = default;

    void add(std::string_view token, std::vector<std::string> expansions)
    {
        auto& slot = m_entries[text::to_lower(text::normalize_whitespace(token))];
        for (auto& e : expansions) {
            auto norm = text::normalize_whitespace(e);
            if (!norm.empty() && std::find(slot.begin(), slot.end(), norm) == slot.end()) {
                slot.push_back(std::move(norm));
            }
        }
    }

    [[nodiscard]] const std::vector<std::string>* find(std::string_view token) const
    {
        auto it = m_entries.find(std::string(token));
        return it == m_entries.end() ? nullptr : &it->second;
    }

    [[nodiscard]] std::size_t size() const noexcept { return m_entries.size(); }
    [[nodiscard]] const std::map<std::string, std::vector<std::string>>& entries() const noexcept
    {
        return m_entries;
    }

  private:
    std::map<std::string, std::vector<std::string>> m_entries;
};

/// Lexicon JSONL: `{"token": string, "expansions": [string...]}`.
inline Lexicon load_lexicon(const std::filesystem::path& path)
{
    Lexicon lex;
    jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
        auto token = jsonl::require_string(obj, "token", line);
        if (text::normalize_whitespace(token).empty()) {
            throw MalformedRecord(line, "field 'token' is empty");
        }
        lex.add(token, jsonl::require_string_array(obj, "expansions", line));
    });
    return lex;
}

/// FNV-1a over the token bytes with the seed folded into the offset basis.
inline std::uint64_t hash_token(std::string_view token, std::uint64_t seed) noexcept
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    std::uint64_t h = 14695981039346656037ULL ^ z;
    for (unsigned char c : token) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Hashed term-frequency embedder. Cosine between two texts reflects their
/// lexical overlap (up to bucket collisions).
class LexicalEmbedder final : public Embedder {
  public:
    LexicalEmbedder(std::string model_id, std::size_t dimension, std::uint64_t seed)
        : m_model_id(std::move(model_id)), m_dimension(dimension), m_seed(seed)
    {
        if (m_dimension == 0) {
            throw ConfigError("embedder.dimension", "must be positive");
        }
    }

    [[nodiscard]] const std::string& model_id() const override { return m_model_id; }
    [[nodiscard]] std::size_t dimension() const override { return m_dimension; }

    [[nodiscard]] std::size_t bucket(std::string_view token) const noexcept
    {
        return static_cast<std::size_t>(hash_token(token, m_seed) % m_dimension);
    }

    [[nodiscard]] EmbeddingVector embed(std::string_view input) const override
    {
        EmbeddingVector v{std::vector<double>(m_dimension, 0.0)};
        for (const auto& tok : text::tokenize(input)) {
            v.values[bucket(tok)] += 1.0;
        }
        l2_normalize(v);
        return v;
    }

  private:
    std::string m_model_id;
    std::size_t m_dimension;
    std::uint64_t m_seed;
};

inline double token_jaccard(std::string_view a, std::string_view b)
{
    auto sa = text::token_set(a);
    auto sb = text::token_set(b);
    if (sa.empty() && sb.empty()) {
        return 0.0;
    }
    std::size_t inter = 0;
    for (const auto& t : sa) {
        inter += sb.count(t);
    }
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

/// Token-Jaccard stand-in for a cross-encoder.
class OverlapScorer final : public PairScorer {
  public:
    explicit OverlapScorer(std::string model_id) : m_model_id(std::move(model_id)) {}

    [[nodiscard]] const std::string& model_id() const override { return m_model_id; }

    [[nodiscard]] double score(std::string_view query, std::string_view document) const override
    {
        return token_jaccard(query, document);
    }

  private:
    std::string m_model_id;
};

/// True when every token of `level` occurs in `context`. An empty level
/// covers nothing.
inline bool covers(const std::set<std::string>& context, std::string_view level)
{
    auto tokens = text::token_set(level);
    if (tokens.empty()) {
        return false;
    }
    return std::all_of(tokens.begin(), tokens.end(),
                       [&](const std::string& t) { return context.contains(t); });
}

/// Mock relevance rule: STRONG when the context mentions the whole type name,
/// WEAK when it mentions the whole family name, IRRELEVANT otherwise.
inline Grade grade_by_rule(std::string_view context, std::string_view pt_text)
{
    auto ctx = text::token_set(context);
    auto fields = parse_rendered(pt_text);
    if (covers(ctx, fields.type_name)) {
        return Grade::strong;
    }
    if (!fields.family.empty() && covers(ctx, fields.family)) {
        return Grade::weak;
    }
    return Grade::irrelevant;
}

/// Deterministic rule-based model. Interpretation appends lexicon expansions
/// to the normalized campaign text; grading uses grade_by_rule.
class RuleModel final : public LanguageModel {
  public:
    explicit RuleModel(std::string model_id, Lexicon lexicon = {})
        : m_model_id(std::move(model_id)), m_lexicon(std::move(lexicon))
    {}

    [[nodiscard]] const std::string& model_id() const override { return m_model_id; }
    [[nodiscard]] const Lexicon& lexicon() const noexcept { return m_lexicon; }

    [[nodiscard]] std::string interpret(std::string_view campaign_text) const override
    {
        auto base = text::normalize_whitespace(campaign_text);
        if (base.empty()) {
            throw EmptyResponse("interpretation of empty campaign text");
        }
        std::vector<std::string> expansions;
        std::set<std::string> seen_tokens;
        for (const auto& tok : text::tokenize(base)) {
            if (!seen_tokens.insert(tok).second) {
                continue;
            }
            if (const auto* exp = m_lexicon.find(tok)) {
                for (const auto& e : *exp) {
                    if (std::find(expansions.begin(), expansions.end(), e) == expansions.end()) {
                        expansions.push_back(e);
                    }
                }
            }
        }
        if (expansions.empty()) {
            return base;
        }
        return base + " " + text::join(expansions, " ");
    }

    [[nodiscard]] Grade classify(std::string_view summary, std::string_view pt_text) const override
    {
        return grade_by_rule(summary, pt_text);
    }

    [[nodiscard]] Grade judge(std::string_view campaign_text, std::string_view pt_text) const override
    {
        return grade_by_rule(campaign_text, pt_text);
    }

    [[nodiscard]] double judge_set_score(std::string_view campaign_text,
                                         std::span<const std::string> pt_texts) const override
    {
        if (pt_texts.empty()) {
            throw UnparseableResponse("set score requested for an empty PT list");
        }
        std::size_t relevant = 0;
        for (const auto& pt : pt_texts) {
            relevant += is_relevant(judge(campaign_text, pt)) ? 1 : 0;
        }
        return static_cast<double>(relevant) / static_cast<double>(pt_texts.size());
    }

    /// Selects every PT whose type name shares at least one token with the
    /// campaign, answering with a JSON array of ids.
    [[nodiscard]] std::string select_pts(std::string_view campaign_text,
                                         std::span<const PtChoice> chunk) const override
    {
        auto ctx = text::token_set(campaign_text);
        jsonl::json ids = jsonl::json::array();
        for (const auto& choice : chunk) {
            for (const auto& tok : text::tokenize(parse_rendered(choice.text).type_name)) {
                if (ctx.contains(tok)) {
                    ids.push_back(choice.id);
                    break;
                }
            }
        }
        return ids.dump();
    }

  private:
    std::string m_model_id;
    Lexicon m_lexicon;
};

}  // namespace ptmap::mock

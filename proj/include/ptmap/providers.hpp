#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptmap/error.hpp"
#include "ptmap/text.hpp"

namespace ptmap {

enum class Grade { strong, weak, irrelevant };

inline std::string_view to_string(Grade g) noexcept
{
    switch (g) {
    case Grade::strong:
        return "STRONG";
    case Grade::weak:
        return "WEAK";
    case Grade::irrelevant:
        return "IRRELEVANT";
    }
    return "IRRELEVANT";
}

inline bool is_relevant(Grade g) noexcept { return g != Grade::irrelevant; }

/// Strict grade parser: the response must be exactly one grade word, in any
/// case, with optional surrounding whitespace. Anything else is an error.
inline Grade parse_grade(std::string_view raw)
{
    auto word = text::to_lower(text::normalize_whitespace(raw));
    if (word == "strong") {
        return Grade::strong;
    }
    if (word == "weak") {
        return Grade::weak;
    }
    if (word == "irrelevant") {
        return Grade::irrelevant;
    }
    throw UnparseableResponse(std::string(raw));
}

/// Dense embedding. Providers emit L2-normalized vectors, or the zero vector
/// for empty text.
struct EmbeddingVector {
    std::vector<double> values;

    [[nodiscard]] std::size_t dimension() const noexcept { return values.size(); }
    [[nodiscard]] bool is_zero() const noexcept
    {
        for (double v : values) {
            if (v != 0.0) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b)
{
    if (a.dimension() != b.dimension()) {
        throw DimensionMismatch(a.dimension(), b.dimension());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        sum += a.values[i] * b.values[i];
    }
    return sum;
}

/// Cosine of two unit vectors is their dot product; anything involving the
/// zero vector is defined as 0.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b)
{
    if (a.is_zero() || b.is_zero()) {
        if (a.dimension() != b.dimension()) {
            throw DimensionMismatch(a.dimension(), b.dimension());
        }
        return 0.0;
    }
    return dot(a, b);
}

inline void l2_normalize(EmbeddingVector& v)
{
    double norm = 0.0;
    for (double x : v.values) {
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        return;
    }
    for (double& x : v.values) {
        x /= norm;
    }
}

/// A product type offered to the zero-shot selector.
struct PtChoice {
    std::string id;
    std::string text;
};

class Embedder {
  public:
    virtual ~Embedder() = default;
    [[nodiscard]] virtual const std::string& model_id() const = 0;
    [[nodiscard]] virtual std::size_t dimension() const = 0;
    [[nodiscard]] virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Pairwise relevance scorer (cross-encoder role). Scores lie in [0, 1].
class PairScorer {
  public:
    virtual ~PairScorer() = default;
    [[nodiscard]] virtual const std::string& model_id() const = 0;
    [[nodiscard]] virtual double score(std::string_view query, std::string_view document) const = 0;
};

/// Instruction-following model. One instance serves one role configuration;
/// the classifier and the judge are separate instances so they can use
/// different models.
class LanguageModel {
  public:
    virtual ~LanguageModel() = default;
    [[nodiscard]] virtual const std::string& model_id() const = 0;

    [[nodiscard]] virtual std::string interpret(std::string_view campaign_text) const = 0;

    [[nodiscard]] virtual Grade classify(std::string_view summary, std::string_view pt_text) const = 0;

    /// Grades several PTs against one summary. Result order matches `pt_texts`.
    [[nodiscard]] virtual std::vector<Grade> classify_batch(std::string_view summary,
                                                            std::span<const std::string> pt_texts) const
    {
        std::vector<Grade> grades;
        grades.reserve(pt_texts.size());
        for (const auto& pt : pt_texts) {
            grades.push_back(classify(summary, pt));
        }
        return grades;
    }

    [[nodiscard]] virtual Grade judge(std::string_view campaign_text, std::string_view pt_text) const = 0;

    [[nodiscard]] virtual double judge_set_score(std::string_view campaign_text,
                                                 std::span<const std::string> pt_texts) const = 0;

    /// Returns the raw model answer; the caller parses it into ids.
    [[nodiscard]] virtual std::string select_pts(std::string_view campaign_text,
                                                 std::span<const PtChoice> chunk) const = 0;
};

}  // namespace ptmap

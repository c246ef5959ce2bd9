#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ptmap/error.hpp"
#include "ptmap/jsonl.hpp"
#include "ptmap/providers.hpp"
#include "ptmap/retrieval.hpp"
#include "ptmap/taxonomy.hpp"

namespace ptmap {

struct Campaign {
    std::string id;
    std::string title;
    std::string content;

    /// `title | content`; a missing half is dropped rather than left as an
    /// empty field.
    [[nodiscard]] std::string canonical_text() const
    {
        auto t = text::normalize_whitespace(title);
        auto c = text::normalize_whitespace(content);
        if (t.empty()) {
            return c;
        }
        if (c.empty()) {
            return t;
        }
        return t + std::string(kFieldSeparator) + c;
    }
};

/// Campaign JSONL: `{"id","title","content"}`. Ids must be unique and title
/// and content must not both be empty.
inline std::vector<Campaign> load_campaigns(const std::filesystem::path& path)
{
    std::vector<Campaign> out;
    std::set<std::string> seen;
    jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
        Campaign c;
        c.id = text::normalize_whitespace(jsonl::require_string(obj, "id", line));
        auto optional_text = [&](const char* field) {
            auto it = obj.find(field);
            if (it == obj.end() || it->is_null()) {
                return std::string();
            }
            if (!it->is_string()) {
                throw MalformedRecord(line, std::string("field '") + field + "' is not a string");
            }
            return it->get<std::string>();
        };
        c.title = optional_text("title");
        c.content = optional_text("content");
        if (c.id.empty()) {
            throw MalformedRecord(line, "field 'id' is empty");
        }
        if (c.canonical_text().empty()) {
            throw MalformedRecord(line, "campaign has neither title nor content");
        }
        if (!seen.insert(c.id).second) {
            throw DuplicateId(c.id);
        }
        out.push_back(std::move(c));
    });
    return out;
}

inline jsonl::json to_json(const Campaign& c)
{
    return {{"id", c.id}, {"title", c.title}, {"content", c.content}};
}

struct Interpretation {
    std::string campaign_id;
    std::string summary;
};

struct CoverageEntry {
    std::string pt_id;
    Grade grade = Grade::strong;
    double retrieval_score = 0.0;
    std::string stage;

    friend bool operator==(const CoverageEntry&, const CoverageEntry&) = default;
};

/// Run metadata for the zero-shot baseline.
struct SelectionStats {
    std::size_t chunks = 0;
    std::size_t failed_chunks = 0;
    std::size_t hallucinations = 0;

    friend bool operator==(const SelectionStats&, const SelectionStats&) = default;
};

/// The PTs a system inferred for one campaign. Never holds IRRELEVANT entries
/// or duplicate pt ids.
struct CoverageSet {
    std::string campaign_id;
    std::string system_id;
    std::vector<CoverageEntry> entries;
    std::optional<std::string> interpretation;
    std::optional<SelectionStats> selection;

    [[nodiscard]] std::set<std::string> pt_ids() const
    {
        std::set<std::string> ids;
        for (const auto& e : entries) {
            ids.insert(e.pt_id);
        }
        return ids;
    }

    friend bool operator==(const CoverageSet&, const CoverageSet&) = default;
};

inline constexpr std::string_view kPipelineSystem = "pipeline";
inline constexpr std::string_view kBm25System = "bm25";
inline constexpr std::string_view kZeroShotSystem = "zero_shot";

/// Ablation variants in ladder order.
inline constexpr std::array<std::string_view, 4> kAblationVariants = {
    "retrieval_only", "des_retrieval", "des_retrieval_llm", "des_retrieval_rerank_llm"};

/// Shortest decimal form of a threshold, used in "dense@<tau>" system ids.
inline std::string format_threshold(double tau)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", tau);
    return buf;
}

inline std::string dense_system_id(double tau) { return "dense@" + format_threshold(tau); }

/// Everything the pipeline and baselines read. Providers other than the
/// embedder may be null when the caller does not run the stages that need them.
struct InferenceContext {
    const Taxonomy* taxonomy = nullptr;
    const DenseIndex* dense = nullptr;
    const Bm25Index* bm25 = nullptr;
    const Embedder* embedder = nullptr;
    const LanguageModel* interpreter = nullptr;
    const LanguageModel* classifier = nullptr;
    const LanguageModel* selector = nullptr;
    const PairScorer* reranker = nullptr;
};

struct PipelineConfig {
    double tau = 0.3;
    bool use_reranker = true;
    std::optional<std::size_t> rerank_cutoff;
    std::size_t classify_parallelism = 1;
};

namespace detail {

template <typename T>
const T& require(const T* p, std::string_view what)
{
    if (p == nullptr) {
        throw ConfigError(std::string(what), "not configured");
    }
    return *p;
}

/// Runs `fn` and attaches the campaign id to any library error.
template <typename Fn>
auto with_campaign(const Campaign& campaign, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        rethrow_with_context(e, "campaign '" + campaign.id + "'");
    }
}

inline CoverageSet uniform_coverage(const Campaign& campaign, std::string system_id,
                                    const std::vector<Candidate>& candidates)
{
    CoverageSet cov{campaign.id, std::move(system_id), {}, std::nullopt, std::nullopt};
    for (const auto& c : candidates) {
        cov.entries.push_back(CoverageEntry{c.pt_id, Grade::strong, c.score, std::string(to_string(c.stage))});
    }
    return cov;
}

}  // namespace detail

inline Interpretation interpret(const Campaign& campaign, const LanguageModel& model)
{
    return detail::with_campaign(campaign, [&] {
        auto summary = model.interpret(campaign.canonical_text());
        if (text::normalize_whitespace(summary).empty()) {
            throw EmptyResponse("empty interpretation");
        }
        return Interpretation{campaign.id, std::move(summary)};
    });
}

/// Classifies each candidate against the summary, fanning out over up to
/// `parallelism` contiguous slices. Grades come back in candidate order.
inline std::vector<Grade> classify_candidates(const std::string& summary, const std::vector<Candidate>& candidates,
                                              const Taxonomy& taxonomy, const LanguageModel& classifier,
                                              std::size_t parallelism)
{
    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& c : candidates) {
        texts.push_back(taxonomy.render(c.pt_id));
    }
    const std::size_t slices = std::max<std::size_t>(1, std::min(parallelism, texts.size()));
    if (slices == 1) {
        return classifier.classify_batch(summary, texts);
    }
    const std::span<const std::string> all(texts);
    const std::size_t per = (texts.size() + slices - 1) / slices;
    std::vector<std::future<std::vector<Grade>>> parts;
    for (std::size_t start = 0; start < texts.size(); start += per) {
        auto slice = all.subspan(start, std::min(per, texts.size() - start));
        parts.push_back(std::async(std::launch::async,
                                   [&classifier, &summary, slice] { return classifier.classify_batch(summary, slice); }));
    }
    std::vector<Grade> grades;
    for (auto& p : parts) {
        auto g = p.get();
        grades.insert(grades.end(), g.begin(), g.end());
    }
    return grades;
}

/// Intermediate products of one pipeline run, kept for ablation and audit.
struct PipelineTrace {
    Interpretation interpretation;
    std::vector<Candidate> retrieved;
    std::optional<std::vector<Candidate>> reranked;
    std::map<std::string, Grade> grades;
};

inline CoverageSet coverage_from_trace(const Campaign& campaign, std::string system_id, const PipelineTrace& trace)
{
    const auto& ordered = trace.reranked ? *trace.reranked : trace.retrieved;
    CoverageSet cov{campaign.id, std::move(system_id), {}, trace.interpretation.summary, std::nullopt};
    for (const auto& c : ordered) {
        auto grade = trace.grades.at(c.pt_id);
        if (is_relevant(grade)) {
            cov.entries.push_back(CoverageEntry{c.pt_id, grade, c.score, std::string(to_string(c.stage))});
        }
    }
    return cov;
}

/// interpret -> embed(summary) -> dense retrieve -> optional rerank ->
/// classify each candidate -> keep STRONG and WEAK.
inline PipelineTrace trace_pipeline(const Campaign& campaign, const InferenceContext& ctx, const PipelineConfig& cfg)
{
    const auto& taxonomy = detail::require(ctx.taxonomy, "taxonomy");
    const auto& dense = detail::require(ctx.dense, "dense index");
    const auto& embedder = detail::require(ctx.embedder, "providers.embedder");
    const auto& interpreter = detail::require(ctx.interpreter, "providers.interpreter");
    const auto& classifier = detail::require(ctx.classifier, "providers.classifier");

    PipelineTrace trace{interpret(campaign, interpreter), {}, std::nullopt, {}};
    detail::with_campaign(campaign, [&] {
        trace.retrieved = dense_retrieve(dense, embedder.embed(trace.interpretation.summary), cfg.tau);
        const auto* to_classify = &trace.retrieved;
        if (cfg.use_reranker) {
            const auto& scorer = detail::require(ctx.reranker, "providers.reranker");
            trace.reranked = rerank(campaign.canonical_text(), trace.retrieved, taxonomy, scorer, cfg.rerank_cutoff);
            to_classify = &*trace.reranked;
        }
        auto grades = classify_candidates(trace.interpretation.summary, *to_classify, taxonomy, classifier,
                                          cfg.classify_parallelism);
        for (std::size_t i = 0; i < grades.size(); ++i) {
            trace.grades.emplace((*to_classify)[i].pt_id, grades[i]);
        }
    });
    return trace;
}

inline CoverageSet run_pipeline(const Campaign& campaign, const InferenceContext& ctx, const PipelineConfig& cfg)
{
    return coverage_from_trace(campaign, std::string(kPipelineSystem), trace_pipeline(campaign, ctx, cfg));
}

/// Lexical baseline over the canonical campaign text. Entries are STRONG by
/// convention.
inline CoverageSet baseline_bm25(const Campaign& campaign, const Bm25Index& index, std::size_t top_k)
{
    return detail::uniform_coverage(campaign, std::string(kBm25System),
                                    bm25_retrieve(index, campaign.canonical_text(), top_k));
}

/// Dense baseline on the raw campaign text, no interpretation. Entries are
/// STRONG by convention.
inline CoverageSet baseline_dense(const Campaign& campaign, const DenseIndex& index, const Embedder& embedder,
                                  double tau, std::optional<std::string> system_id = std::nullopt)
{
    return detail::with_campaign(campaign, [&] {
        auto cands = dense_retrieve(index, embedder.embed(campaign.canonical_text()), tau);
        return detail::uniform_coverage(campaign, system_id ? *system_id : dense_system_id(tau), cands);
    });
}

/// Strict selection parser: a JSON array of string ids, optionally surrounded
/// by whitespace.
inline std::vector<std::string> parse_selection(std::string_view raw)
{
    jsonl::json arr;
    try {
        arr = jsonl::json::parse(raw);
    } catch (const jsonl::json::parse_error&) {
        throw UnparseableResponse(std::string(raw));
    }
    if (!arr.is_array()) {
        throw UnparseableResponse(std::string(raw));
    }
    std::vector<std::string> ids;
    for (const auto& v : arr) {
        if (!v.is_string()) {
            throw UnparseableResponse(std::string(raw));
        }
        ids.push_back(v.get<std::string>());
    }
    return ids;
}

/// Sends the taxonomy in chunks of `chunk_size` rendered nodes and unions the
/// selections. Ids outside the chunk count as hallucinations; an unparseable
/// chunk answer is counted and skipped.
inline CoverageSet baseline_zero_shot(const Campaign& campaign, const Taxonomy& taxonomy, const LanguageModel& selector,
                                      std::size_t chunk_size)
{
    if (chunk_size == 0) {
        throw ConfigError("zero_shot.chunk_size", "must be positive");
    }
    CoverageSet cov{campaign.id, std::string(kZeroShotSystem), {}, std::nullopt, SelectionStats{}};
    auto& stats = *cov.selection;
    std::unordered_set<std::string> selected;
    const auto text = campaign.canonical_text();
    const auto& nodes = taxonomy.nodes();
    for (std::size_t start = 0; start < nodes.size(); start += chunk_size) {
        const auto end = std::min(nodes.size(), start + chunk_size);
        std::vector<PtChoice> chunk;
        std::unordered_set<std::string> in_chunk;
        for (std::size_t i = start; i < end; ++i) {
            chunk.push_back(PtChoice{nodes[i].id, render_node(nodes[i])});
            in_chunk.insert(nodes[i].id);
        }
        ++stats.chunks;
        std::vector<std::string> ids;
        try {
            ids = parse_selection(selector.select_pts(text, chunk));
        } catch (const UnparseableResponse&) {
            ++stats.failed_chunks;
            continue;
        } catch (const Error& e) {
            rethrow_with_context(e, "campaign '" + campaign.id + "'");
        }
        for (auto& id : ids) {
            if (!in_chunk.contains(id)) {
                ++stats.hallucinations;
                continue;
            }
            if (selected.insert(id).second) {
                cov.entries.push_back(CoverageEntry{id, Grade::strong, 1.0, "SELECTED"});
            }
        }
    }
    return cov;
}

/// The four ladder variants for one campaign, in kAblationVariants order.
/// Interpretation, retrieval and classification are computed once and shared.
inline std::vector<CoverageSet> run_ablation(const Campaign& campaign, const InferenceContext& ctx,
                                             const PipelineConfig& cfg)
{
    const auto& taxonomy = detail::require(ctx.taxonomy, "taxonomy");
    const auto& dense = detail::require(ctx.dense, "dense index");
    const auto& embedder = detail::require(ctx.embedder, "providers.embedder");
    const auto& scorer = detail::require(ctx.reranker, "providers.reranker");
    const auto& classifier = detail::require(ctx.classifier, "providers.classifier");

    std::vector<CoverageSet> out;
    out.push_back(baseline_dense(campaign, dense, embedder, cfg.tau, std::string(kAblationVariants[0])));

    PipelineConfig no_rerank = cfg;
    no_rerank.use_reranker = false;
    auto trace = trace_pipeline(campaign, ctx, no_rerank);

    auto described = detail::uniform_coverage(campaign, std::string(kAblationVariants[1]), trace.retrieved);
    described.interpretation = trace.interpretation.summary;
    out.push_back(std::move(described));

    out.push_back(coverage_from_trace(campaign, std::string(kAblationVariants[2]), trace));

    detail::with_campaign(campaign, [&] {
        trace.reranked = rerank(campaign.canonical_text(), trace.retrieved, taxonomy, scorer, cfg.rerank_cutoff);
        // Cutoff can only drop candidates, so every survivor already has a grade;
        // classify anything unseen for scorers that reorder beyond the input.
        std::vector<Candidate> missing;
        for (const auto& c : *trace.reranked) {
            if (!trace.grades.contains(c.pt_id)) {
                missing.push_back(c);
            }
        }
        if (!missing.empty()) {
            auto grades = classify_candidates(trace.interpretation.summary, missing, taxonomy, classifier,
                                              cfg.classify_parallelism);
            for (std::size_t i = 0; i < missing.size(); ++i) {
                trace.grades.emplace(missing[i].pt_id, grades[i]);
            }
        }
    });
    out.push_back(coverage_from_trace(campaign, std::string(kAblationVariants[3]), trace));
    return out;
}

// ---------------------------------------------------------------------------
// Coverage JSONL

inline jsonl::json to_json(const CoverageSet& cov)
{
    jsonl::json entries = jsonl::json::array();
    for (const auto& e : cov.entries) {
        entries.push_back({{"pt_id", e.pt_id},
                           {"grade", to_string(e.grade)},
                           {"retrieval_score", e.retrieval_score},
                           {"stage", e.stage}});
    }
    jsonl::json obj = {{"campaign_id", cov.campaign_id}, {"system_id", cov.system_id}, {"entries", entries}};
    if (cov.interpretation) {
        obj["interpretation"] = *cov.interpretation;
    }
    if (cov.selection) {
        obj["selection"] = {{"chunks", cov.selection->chunks},
                            {"failed_chunks", cov.selection->failed_chunks},
                            {"hallucinations", cov.selection->hallucinations}};
    }
    return obj;
}

/// Parses one coverage record. When `taxonomy` is given every pt id must
/// resolve in it.
inline CoverageSet coverage_from_json(const jsonl::json& obj, std::size_t line, const Taxonomy* taxonomy = nullptr)
{
    CoverageSet cov;
    cov.campaign_id = jsonl::require_string(obj, "campaign_id", line);
    cov.system_id = jsonl::require_string(obj, "system_id", line);
    auto it = obj.find("entries");
    if (it == obj.end() || !it->is_array()) {
        throw MalformedRecord(line, "missing 'entries' array");
    }
    std::set<std::string> seen;
    for (const auto& e : *it) {
        if (!e.is_object()) {
            throw MalformedRecord(line, "coverage entry is not an object");
        }
        CoverageEntry entry;
        entry.pt_id = jsonl::require_string(e, "pt_id", line);
        auto grade = jsonl::require_string(e, "grade", line);
        try {
            entry.grade = parse_grade(grade);
        } catch (const UnparseableResponse&) {
            throw MalformedRecord(line, "invalid grade '" + grade + "'");
        }
        if (!is_relevant(entry.grade)) {
            throw MalformedRecord(line, "coverage may not contain IRRELEVANT entries");
        }
        if (auto s = e.find("retrieval_score"); s != e.end() && s->is_number()) {
            entry.retrieval_score = s->get<double>();
        }
        if (auto st = e.find("stage"); st != e.end() && st->is_string()) {
            entry.stage = st->get<std::string>();
        }
        if (!seen.insert(entry.pt_id).second) {
            throw MalformedRecord(line, "duplicate pt id '" + entry.pt_id + "' in coverage");
        }
        if (taxonomy != nullptr && !taxonomy->contains(entry.pt_id)) {
            throw UnknownPt(entry.pt_id);
        }
        cov.entries.push_back(std::move(entry));
    }
    if (auto s = obj.find("interpretation"); s != obj.end() && s->is_string()) {
        cov.interpretation = s->get<std::string>();
    }
    if (auto s = obj.find("selection"); s != obj.end() && s->is_object()) {
        cov.selection = SelectionStats{s->value("chunks", std::size_t{0}), s->value("failed_chunks", std::size_t{0}),
                                       s->value("hallucinations", std::size_t{0})};
    }
    return cov;
}

inline std::vector<CoverageSet> load_coverage(const std::filesystem::path& path, const Taxonomy* taxonomy = nullptr)
{
    std::vector<CoverageSet> out;
    jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
        out.push_back(coverage_from_json(obj, line, taxonomy));
    });
    return out;
}

}  // namespace ptmap

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ptmap/error.hpp"
#include "ptmap/providers.hpp"
#include "ptmap/taxonomy.hpp"
#include "ptmap/text.hpp"

namespace ptmap {

enum class Stage { bm25, dense, reranked };

inline std::string_view to_string(Stage s) noexcept
{
    switch (s) {
    case Stage::bm25:
        return "BM25";
    case Stage::dense:
        return "DENSE";
    case Stage::reranked:
        return "RERANKED";
    }
    return "DENSE";
}

struct Candidate {
    std::string pt_id;
    double score = 0.0;
    Stage stage = Stage::dense;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Score descending, then pt_id ascending. Total on finite scores.
inline bool ranks_before(const Candidate& a, const Candidate& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.pt_id < b.pt_id;
}

inline void sort_candidates(std::vector<Candidate>& cs)
{
    std::sort(cs.begin(), cs.end(), ranks_before);
}

// ---------------------------------------------------------------------------
// Dense retrieval

struct DenseEntry {
    std::string pt_id;
    EmbeddingVector vector;
};

/// Exact (brute-force) embedding index over the taxonomy.
class DenseIndex {
  public:
    DenseIndex() = default;

    DenseIndex(std::string model_id, std::size_t dimension, std::vector<DenseEntry> entries)
        : m_model_id(std::move(model_id)), m_dimension(dimension), m_entries(std::move(entries))
    {
        for (std::size_t i = 0; i < m_entries.size(); ++i) {
            if (m_entries[i].vector.dimension() != m_dimension) {
                throw DimensionMismatch(m_dimension, m_entries[i].vector.dimension());
            }
            if (!m_by_id.emplace(m_entries[i].pt_id, i).second) {
                throw DuplicateId(m_entries[i].pt_id);
            }
        }
    }

    [[nodiscard]] const std::string& model_id() const noexcept { return m_model_id; }
    [[nodiscard]] std::size_t dimension() const noexcept { return m_dimension; }
    [[nodiscard]] const std::vector<DenseEntry>& entries() const noexcept { return m_entries; }
    [[nodiscard]] std::size_t size() const noexcept { return m_entries.size(); }

    [[nodiscard]] const EmbeddingVector* find(std::string_view pt_id) const
    {
        auto it = m_by_id.find(std::string(pt_id));
        return it == m_by_id.end() ? nullptr : &m_entries[it->second].vector;
    }

  private:
    std::string m_model_id;
    std::size_t m_dimension = 0;
    std::vector<DenseEntry> m_entries;
    std::unordered_map<std::string, std::size_t> m_by_id;
};

/// Embeds every node's rendered text. With `parallelism > 1` embedding calls
/// run on worker threads; results are placed by node position so the index is
/// identical to a sequential build.
inline DenseIndex build_dense_index(const Taxonomy& taxonomy, const Embedder& embedder,
                                    std::size_t parallelism = 1)
{
    const auto& nodes = taxonomy.nodes();
    std::vector<DenseEntry> entries(nodes.size());
    std::vector<std::exception_ptr> errors(nodes.size());

    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < nodes.size(); i += step) {
            try {
                entries[i] = DenseEntry{nodes[i].id, embedder.embed(render_node(nodes[i]))};
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, nodes.size()));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back(work, w, workers);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!errors[i]) {
            continue;
        }
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            rethrow_with_context(e, "embedding pt '" + nodes[i].id + "'");
        }
    }
    for (const auto& e : entries) {
        if (e.vector.dimension() != embedder.dimension()) {
            throw DimensionMismatch(embedder.dimension(), e.vector.dimension());
        }
    }
    return DenseIndex(embedder.model_id(), embedder.dimension(), std::move(entries));
}

/// Cosine used by retrieval and coherence: the dot product of unit vectors,
/// exactly 1 for identical non-zero vectors, 0 when either side is zero,
/// clamped to [-1, 1].
inline double unit_cosine(const EmbeddingVector& a, const EmbeddingVector& b)
{
    if (a.dimension() != b.dimension()) {
        throw DimensionMismatch(a.dimension(), b.dimension());
    }
    if (a.is_zero() || b.is_zero()) {
        return 0.0;
    }
    if (a == b) {
        return 1.0;
    }
    return std::clamp(dot(a, b), -1.0, 1.0);
}

/// Every node with cosine >= tau, best first.
inline std::vector<Candidate> dense_retrieve(const DenseIndex& index, const EmbeddingVector& query,
                                             double tau)
{
    if (query.dimension() != index.dimension()) {
        throw DimensionMismatch(index.dimension(), query.dimension());
    }
    std::vector<Candidate> out;
    for (const auto& entry : index.entries()) {
        double cos = unit_cosine(query, entry.vector);
        if (cos >= tau) {
            out.push_back(Candidate{entry.pt_id, cos, Stage::dense});
        }
    }
    sort_candidates(out);
    return out;
}

// ---------------------------------------------------------------------------
// BM25

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::size_t doc = 0;   // position in the index's document list
    std::size_t tf = 0;

    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Okapi BM25 over rendered PT text.
///
/// idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1), never negative.
/// score(q, d) = sum over query token occurrences of
///     idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl)).
class Bm25Index {
  public:
    Bm25Index() = default;

    Bm25Index(Bm25Params params, std::vector<std::string> pt_ids, std::vector<std::size_t> doc_lengths,
              std::map<std::string, std::vector<Posting>> postings)
        : m_params(params),
          m_pt_ids(std::move(pt_ids)),
          m_doc_lengths(std::move(doc_lengths)),
          m_postings(std::move(postings))
    {
        validate_params(m_params);
        if (m_pt_ids.empty() || m_pt_ids.size() != m_doc_lengths.size()) {
            throw Error("InvalidIndex", "BM25 index needs one length per document");
        }
        double total = 0.0;
        for (auto len : m_doc_lengths) {
            total += static_cast<double>(len);
        }
        m_avg_doc_length = total / static_cast<double>(m_doc_lengths.size());
    }

    static void validate_params(const Bm25Params& p)
    {
        if (!(p.k1 > 0.0)) {
            throw ConfigError("bm25.k1", "must be > 0");
        }
        if (!(p.b >= 0.0 && p.b <= 1.0)) {
            throw ConfigError("bm25.b", "must lie in [0, 1]");
        }
    }

    [[nodiscard]] const Bm25Params& params() const noexcept { return m_params; }
    [[nodiscard]] std::size_t doc_count() const noexcept { return m_pt_ids.size(); }
    [[nodiscard]] double avg_doc_length() const noexcept { return m_avg_doc_length; }
    [[nodiscard]] const std::vector<std::string>& pt_ids() const noexcept { return m_pt_ids; }
    [[nodiscard]] const std::vector<std::size_t>& doc_lengths() const noexcept { return m_doc_lengths; }
    [[nodiscard]] const std::map<std::string, std::vector<Posting>>& postings() const noexcept
    {
        return m_postings;
    }

    [[nodiscard]] const std::vector<Posting>& postings(std::string_view term) const
    {
        static const std::vector<Posting> empty;
        auto it = m_postings.find(std::string(term));
        return it == m_postings.end() ? empty : it->second;
    }

    [[nodiscard]] double idf(std::string_view term) const
    {
        const auto n = static_cast<double>(doc_count());
        const auto df = static_cast<double>(postings(term).size());
        return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5) + 1.0));
    }

    /// Scores of every document for `query`, indexed by document position.
    [[nodiscard]] std::vector<double> score_all(std::string_view query) const
    {
        std::vector<double> scores(doc_count(), 0.0);
        const double k1 = m_params.k1;
        const double b = m_params.b;
        for (const auto& term : text::tokenize(query)) {
            const auto& plist = postings(term);
            if (plist.empty()) {
                continue;
            }
            const double w = idf(term);
            for (const auto& p : plist) {
                const auto tf = static_cast<double>(p.tf);
                const double norm = 1.0 - b + b * static_cast<double>(m_doc_lengths[p.doc]) / m_avg_doc_length;
                scores[p.doc] += w * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
        }
        return scores;
    }

  private:
    Bm25Params m_params;
    std::vector<std::string> m_pt_ids;
    std::vector<std::size_t> m_doc_lengths;
    std::map<std::string, std::vector<Posting>> m_postings;
    double m_avg_doc_length = 0.0;
};

inline Bm25Index bm25_build(const Taxonomy& taxonomy, Bm25Params params = {})
{
    Bm25Index::validate_params(params);
    std::vector<std::string> ids;
    std::vector<std::size_t> lengths;
    std::map<std::string, std::vector<Posting>> postings;
    for (const auto& node : taxonomy) {
        const std::size_t doc = ids.size();
        auto tokens = text::tokenize(render_node(node));
        std::map<std::string, std::size_t> tf;
        for (const auto& t : tokens) {
            ++tf[t];
        }
        for (const auto& [term, count] : tf) {
            postings[term].push_back(Posting{doc, count});
        }
        ids.push_back(node.id);
        lengths.push_back(tokens.size());
    }
    return Bm25Index(params, std::move(ids), std::move(lengths), std::move(postings));
}

/// Top `top_k` documents with a positive score, best first.
inline std::vector<Candidate> bm25_retrieve(const Bm25Index& index, std::string_view query, std::size_t top_k)
{
    std::vector<Candidate> out;
    if (top_k == 0) {
        return out;
    }
    auto scores = index.score_all(query);
    for (std::size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] > 0.0) {
            out.push_back(Candidate{index.pt_ids()[d], scores[d], Stage::bm25});
        }
    }
    sort_candidates(out);
    if (out.size() > top_k) {
        out.resize(top_k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reranking

/// Rescores candidates against the campaign text with a pairwise scorer and
/// re-sorts them. Without a cutoff the candidate set is unchanged.
inline std::vector<Candidate> rerank(std::string_view campaign_text, const std::vector<Candidate>& candidates,
                                     const Taxonomy& taxonomy, const PairScorer& scorer,
                                     std::optional<std::size_t> cutoff = std::nullopt)
{
    std::vector<Candidate> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        double s = scorer.score(campaign_text, taxonomy.render(c.pt_id));
        out.push_back(Candidate{c.pt_id, s, Stage::reranked});
    }
    sort_candidates(out);
    if (cutoff && out.size() > *cutoff) {
        out.resize(*cutoff);
    }
    return out;
}

}  // namespace ptmap

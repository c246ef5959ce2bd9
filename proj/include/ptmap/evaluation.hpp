#pragma once

#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ptmap/error.hpp"
#include "ptmap/inference.hpp"
#include "ptmap/jsonl.hpp"
#include "ptmap/providers.hpp"
#include "ptmap/retrieval.hpp"
#include "ptmap/taxonomy.hpp"

namespace ptmap {

using PtSet = std::set<std::string>;

/// Undefined metrics are nullopt and never coerced to 0.
struct SetMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

inline std::size_t intersection_size(const PtSet& a, const PtSet& b)
{
    std::size_t n = 0;
    for (const auto& x : a) {
        n += b.count(x);
    }
    return n;
}

inline std::optional<double> harmonic_mean(std::optional<double> p, std::optional<double> r)
{
    if (!p || !r || *p + *r == 0.0) {
        return std::nullopt;
    }
    return 2.0 * *p * *r / (*p + *r);
}

inline SetMetrics precision_recall_f1(const PtSet& pred, const PtSet& truth)
{
    if (truth.empty()) {
        throw EmptyTruth();
    }
    const auto hit = static_cast<double>(intersection_size(pred, truth));
    SetMetrics m;
    if (!pred.empty()) {
        m.precision = hit / static_cast<double>(pred.size());
    }
    m.recall = hit / static_cast<double>(truth.size());
    m.f1 = harmonic_mean(m.precision, m.recall);
    return m;
}

/// Mean pairwise cosine over all unordered pairs; undefined below two PTs.
inline std::optional<double> coherence(const PtSet& pred, const DenseIndex& index)
{
    std::vector<const EmbeddingVector*> vecs;
    for (const auto& id : pred) {
        const auto* v = index.find(id);
        if (v == nullptr) {
            throw MissingEmbedding(id);
        }
        vecs.push_back(v);
    }
    if (vecs.size() < 2) {
        return std::nullopt;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        for (std::size_t j = i + 1; j < vecs.size(); ++j) {
            sum += unit_cosine(*vecs[i], *vecs[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

/// Jaccard similarity |A ∩ B| / |A ∪ B|; two empty sets agree perfectly.
inline double jaccard_agreement(const PtSet& a, const PtSet& b)
{
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    const auto inter = intersection_size(a, b);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// ---------------------------------------------------------------------------
// Judge

/// Grades keyed by (campaign, pt, judge model). Lookup-or-insert is atomic
/// per key: concurrent requests for one key share a single judgment, and a
/// failed judgment is not cached.
class JudgeCache {
  public:
    using Key = std::tuple<std::string, std::string, std::string>;

    JudgeCache() = default;
    JudgeCache(const JudgeCache&) = delete;
    JudgeCache& operator=(const JudgeCache&) = delete;

    template <typename Fn>
    Grade get_or_judge(const std::string& campaign_id, const std::string& pt_id, const std::string& model_id, Fn&& fn)
    {
        Key key{campaign_id, pt_id, model_id};
        std::shared_future<Grade> future;
        std::optional<std::promise<Grade>> owner;
        {
            std::lock_guard lock(m_mu);
            if (auto it = m_entries.find(key); it != m_entries.end()) {
                future = it->second;
            } else {
                owner.emplace();
                future = owner->get_future().share();
                m_entries.emplace(key, future);
            }
        }
        if (owner) {
            try {
                owner->set_value(fn());
                std::lock_guard lock(m_mu);
                ++m_judged;
            } catch (...) {
                {
                    std::lock_guard lock(m_mu);
                    m_entries.erase(key);
                }
                owner->set_exception(std::current_exception());
            }
        }
        return future.get();
    }

    /// Number of judgments actually computed (cache misses that succeeded).
    [[nodiscard]] std::size_t judged() const
    {
        std::lock_guard lock(m_mu);
        return m_judged;
    }

    [[nodiscard]] std::size_t size() const
    {
        std::lock_guard lock(m_mu);
        return m_entries.size();
    }

    /// Judge cache JSONL: `{"campaign_id","pt_id","model_id","grade"}`.
    void load(const std::filesystem::path& path)
    {
        if (!std::filesystem::exists(path)) {
            return;
        }
        std::lock_guard lock(m_mu);
        jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
            Key key{jsonl::require_string(obj, "campaign_id", line), jsonl::require_string(obj, "pt_id", line),
                    jsonl::require_string(obj, "model_id", line)};
            Grade g;
            try {
                g = parse_grade(jsonl::require_string(obj, "grade", line));
            } catch (const UnparseableResponse& e) {
                throw MalformedRecord(line, "invalid grade '" + e.raw() + "'");
            }
            std::promise<Grade> p;
            p.set_value(g);
            m_entries.insert_or_assign(std::move(key), p.get_future().share());
        });
    }

    /// Rewrites the whole cache in key order and renames it into place.
    void save(const std::filesystem::path& path) const
    {
        std::string content;
        {
            std::lock_guard lock(m_mu);
            for (const auto& [key, future] : m_entries) {
                if (future.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
                    continue;
                }
                const auto& [campaign, pt, model] = key;
                content += jsonl::dump_line(
                    {{"campaign_id", campaign}, {"pt_id", pt}, {"model_id", model}, {"grade", to_string(future.get())}});
                content += '\n';
            }
        }
        jsonl::write_atomic(path, content);
    }

  private:
    mutable std::mutex m_mu;
    std::map<Key, std::shared_future<Grade>> m_entries;
    std::size_t m_judged = 0;
};

struct JudgeMetrics {
    std::optional<double> llm_precision;
    std::optional<double> llm_recall;
    std::optional<double> llm_score;
};

/// Judge-relevant PTs among `pts` for one campaign, judging each pt through
/// the cache.
inline PtSet judge_relevant(const Campaign& campaign, const PtSet& pts, const Taxonomy& taxonomy,
                            const LanguageModel& judge, JudgeCache& cache)
{
    const auto text = campaign.canonical_text();
    PtSet relevant;
    for (const auto& pt : pts) {
        auto grade = cache.get_or_judge(campaign.id, pt, judge.model_id(),
                                        [&] { return judge.judge(text, taxonomy.render(pt)); });
        if (is_relevant(grade)) {
            relevant.insert(pt);
        }
    }
    return relevant;
}

/// LLM-precision, LLM-recall and LLM score for every system on one campaign.
///
/// The judge grades each PT in the union of all systems' predictions once.
/// Recall's denominator is the judge-relevant part of that union. Any judge
/// failure propagates, so a campaign never gets partial metrics.
inline std::map<std::string, JudgeMetrics> judge_metrics(const Campaign& campaign,
                                                         const std::vector<CoverageSet>& systems,
                                                         const Taxonomy& taxonomy, const LanguageModel& judge,
                                                         JudgeCache& cache)
{
    PtSet pool;
    for (const auto& s : systems) {
        auto ids = s.pt_ids();
        pool.insert(ids.begin(), ids.end());
    }
    const auto relevant = judge_relevant(campaign, pool, taxonomy, judge, cache);
    const auto text = campaign.canonical_text();

    std::map<std::string, JudgeMetrics> out;
    for (const auto& s : systems) {
        const auto pred = s.pt_ids();
        JudgeMetrics m;
        const auto hit = static_cast<double>(intersection_size(pred, relevant));
        if (!pred.empty()) {
            m.llm_precision = hit / static_cast<double>(pred.size());
            std::vector<std::string> texts;
            for (const auto& e : s.entries) {
                texts.push_back(taxonomy.render(e.pt_id));
            }
            m.llm_score = judge.judge_set_score(text, texts);
        }
        if (!relevant.empty()) {
            m.llm_recall = hit / static_cast<double>(relevant.size());
        }
        out[s.system_id] = m;
    }
    return out;
}

}  // namespace ptmap

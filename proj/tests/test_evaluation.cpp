#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ptmap/evaluation.hpp"
#include "ptmap/report.hpp"
#include "support.hpp"

using namespace ptmap;

namespace {

/// Judges a PT relevant when its rendered text contains one of `relevant`
/// type names; counts every judge call.
class ScriptedJudge final : public LanguageModel {
  public:
    explicit ScriptedJudge(std::set<std::string> relevant) : m_relevant(std::move(relevant)) {}

    const std::string& model_id() const override { return m_id; }
    std::string interpret(std::string_view) const override { return ""; }
    Grade classify(std::string_view, std::string_view) const override { return Grade::irrelevant; }
    Grade judge(std::string_view, std::string_view pt_text) const override
    {
        ++calls;
        if (fail_on && pt_text.find(*fail_on) != std::string_view::npos) {
            throw ProviderUnavailable("judge down");
        }
        for (const auto& r : m_relevant) {
            if (pt_text.find(r) != std::string_view::npos) {
                return Grade::strong;
            }
        }
        return Grade::irrelevant;
    }
    double judge_set_score(std::string_view, std::span<const std::string> texts) const override
    {
        return texts.empty() ? 0.0 : 0.25;
    }
    std::string select_pts(std::string_view, std::span<const PtChoice>) const override { return ""; }

    mutable std::atomic<int> calls{0};
    std::optional<std::string> fail_on;

  private:
    std::string m_id = "scripted-judge";
    std::set<std::string> m_relevant;
};

Taxonomy p_taxonomy()
{
    std::vector<PtNode> nodes;
    for (int i = 1; i <= 4; ++i) {
        nodes.push_back(ptmap::testing::node("p" + std::to_string(i), "Cat", "Fam", "Type" + std::to_string(i)));
    }
    return Taxonomy(std::move(nodes));
}

CoverageSet coverage(std::string system, std::initializer_list<std::string> pts)
{
    CoverageSet s;
    s.campaign_id = "c1";
    s.system_id = std::move(system);
    for (const auto& p : pts) {
        CoverageEntry e;
        e.pt_id = p;
        e.stage = "DENSE";
        s.entries.push_back(e);
    }
    return s;
}

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector{std::move(v)}; }

}  // namespace

TEST(SetMetrics, WorkedExamples)
{
    auto m = precision_recall_f1({"a", "b"}, {"a", "b"});
    EXPECT_EQ(*m.precision, 1.0);
    EXPECT_EQ(*m.recall, 1.0);
    EXPECT_EQ(*m.f1, 1.0);

    m = precision_recall_f1({"a", "b", "c", "d"}, {"a", "b"});
    EXPECT_EQ(*m.precision, 0.5);
    EXPECT_EQ(*m.recall, 1.0);
    EXPECT_NEAR(*m.f1, 2.0 / 3.0, 1e-15);
}

TEST(SetMetrics, UndefinedStaysUnset)
{
    auto m = precision_recall_f1({}, {"a"});
    EXPECT_FALSE(m.precision);
    EXPECT_EQ(*m.recall, 0.0);
    EXPECT_FALSE(m.f1);

    m = precision_recall_f1({"x"}, {"a"});
    EXPECT_EQ(*m.precision, 0.0);
    EXPECT_FALSE(m.f1);

    EXPECT_THROW(precision_recall_f1({"a"}, {}), EmptyTruth);
}

TEST(SetMetrics, MatchesBitmaskOracle)
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto width = 1 + rng() % 12;
        const std::uint64_t mask = (1ULL << width) - 1;
        const std::uint64_t pred = rng() & mask;
        std::uint64_t truth = rng() & mask;
        if (truth == 0) {
            truth = 1;
        }
        PtSet p;
        PtSet t;
        for (std::uint64_t b = 0; b < width; ++b) {
            if ((pred >> b) & 1U) {
                p.insert("pt" + std::to_string(b));
            }
            if ((truth >> b) & 1U) {
                t.insert("pt" + std::to_string(b));
            }
        }
        auto got = precision_recall_f1(p, t);
        auto want = oracle::prf_bitmask(pred, truth);
        ASSERT_EQ(got.precision.has_value(), want.precision.has_value());
        ASSERT_EQ(got.f1.has_value(), want.f1.has_value());
        if (got.precision) {
            EXPECT_NEAR(*got.precision, *want.precision, 1e-12);
        }
        EXPECT_NEAR(*got.recall, *want.recall, 1e-12);
        if (got.f1) {
            const double pr = *got.precision;
            const double rc = *got.recall;
            EXPECT_NEAR(*got.f1, *want.f1, 1e-12);
            EXPECT_NEAR(*got.f1, 2 * pr * rc / (pr + rc), 1e-12);
            EXPECT_LE(*got.f1, std::min(2 * pr, 2 * rc) + 1e-12);
            EXPECT_LE(*got.f1, std::max(pr, rc) + 1e-12);
        }
        EXPECT_NEAR(jaccard_agreement(p, t), oracle::jaccard_bitmask(pred, truth), 1e-12);
    }
}

TEST(SetMetrics, PermutationInvariant)
{
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
        PtSet p;
        PtSet t;
        PtSet p2;
        PtSet t2;
        // Relabel id k as "z<9-k>", which reverses the lexical order.
        for (int k = 0; k < 10; ++k) {
            const bool in_p = rng() % 2 == 0;
            const bool in_t = rng() % 2 == 0 || k == 0;
            if (in_p) {
                p.insert("a" + std::to_string(k));
                p2.insert("z" + std::to_string(9 - k));
            }
            if (in_t) {
                t.insert("a" + std::to_string(k));
                t2.insert("z" + std::to_string(9 - k));
            }
        }
        auto a = precision_recall_f1(p, t);
        auto b = precision_recall_f1(p2, t2);
        EXPECT_EQ(a.precision, b.precision);
        EXPECT_EQ(a.recall, b.recall);
        EXPECT_EQ(a.f1, b.f1);
    }
}

TEST(Jaccard, Cases)
{
    EXPECT_EQ(jaccard_agreement({"a", "b"}, {"a", "b"}), 1.0);
    EXPECT_EQ(jaccard_agreement({"a"}, {"b"}), 0.0);
    EXPECT_EQ(jaccard_agreement({}, {}), 1.0);
    EXPECT_NEAR(jaccard_agreement({"a", "b", "c"}, {"b", "c", "d"}), 0.5, 1e-15);
}

TEST(Coherence, HandComputedFourVectors)
{
    // Unit vectors e1, e2, (e1+e2)/sqrt2, -e1. Pair dots:
    // e1.e2 = 0, e1.u = 1/sqrt2, e1.-e1 = -1, e2.u = 1/sqrt2, e2.-e1 = 0, u.-e1 = -1/sqrt2.
    const double r = 1.0 / std::sqrt(2.0);
    DenseIndex index("m", 2,
                     {{"a", vec({1, 0})}, {"b", vec({0, 1})}, {"c", vec({r, r})}, {"d", vec({-1, 0})}});
    const double expected = (0.0 + r - 1.0 + r + 0.0 - r) / 6.0;
    EXPECT_NEAR(*coherence({"a", "b", "c", "d"}, index), expected, 1e-12);
    EXPECT_NEAR(*coherence({"a", "c"}, index), r, 1e-12);
}

TEST(Coherence, EdgeCases)
{
    DenseIndex index("m", 3, {{"a", vec({0.6, 0.8, 0})}, {"b", vec({0.6, 0.8, 0})}, {"z", vec({0, 0, 0})}});
    EXPECT_EQ(*coherence({"a", "b"}, index), 1.0);
    EXPECT_FALSE(coherence({"a"}, index));
    EXPECT_FALSE(coherence({}, index));
    EXPECT_EQ(*coherence({"a", "z"}, index), 0.0);
    EXPECT_THROW(coherence({"a", "missing"}, index), MissingEmbedding);
}

TEST(Coherence, MatchesPairOracle)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = rng() % 7;
        std::vector<DenseEntry> entries;
        std::vector<std::vector<double>> raw;
        PtSet ids;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> v(8);
            for (auto& x : v) {
                x = gauss(rng);
            }
            if (i > 0 && rng() % 4 == 0) {
                v = raw.back();  // a duplicate vector now and then
            }
            raw.push_back(v);
            auto e = EmbeddingVector{v};
            l2_normalize(e);
            raw.back() = e.values;
            entries.push_back({"v" + std::to_string(i), e});
            ids.insert("v" + std::to_string(i));
        }
        DenseIndex index("m", 8, std::move(entries));
        auto got = coherence(ids, index);
        auto want = oracle::coherence_pairs(raw);
        ASSERT_EQ(got.has_value(), want.has_value());
        if (got) {
            EXPECT_NEAR(*got, *want, 1e-12);
        }
    }
}

TEST(JudgeMetrics, UnionSemanticsWorkedExample)
{
    auto tax = p_taxonomy();
    ScriptedJudge judge({"Type2", "Type3"});
    JudgeCache cache;
    Campaign c{"c1", "Title", "Body"};
    auto out = judge_metrics(c, {coverage("A", {"p1", "p2"}), coverage("B", {"p2", "p3"})}, tax, judge, cache);
    EXPECT_EQ(*out["A"].llm_precision, 0.5);
    EXPECT_EQ(*out["A"].llm_recall, 0.5);
    EXPECT_EQ(*out["B"].llm_precision, 1.0);
    EXPECT_EQ(*out["B"].llm_recall, 1.0);
    EXPECT_EQ(judge.calls.load(), 3);  // p1, p2, p3 once each
}

TEST(JudgeMetrics, SingleSystemAllRelevant)
{
    auto tax = p_taxonomy();
    ScriptedJudge judge({"Type"});
    JudgeCache cache;
    auto out = judge_metrics(Campaign{"c1", "T", ""}, {coverage("S", {"p1", "p4"})}, tax, judge, cache);
    EXPECT_EQ(*out["S"].llm_precision, 1.0);
    EXPECT_EQ(*out["S"].llm_recall, 1.0);
    EXPECT_EQ(*out["S"].llm_score, 0.25);
}

TEST(JudgeMetrics, EmptyPredictionsAndNoRelevant)
{
    auto tax = p_taxonomy();
    ScriptedJudge judge({});
    JudgeCache cache;
    auto out = judge_metrics(Campaign{"c1", "T", ""}, {coverage("E", {}), coverage("S", {"p1"})}, tax, judge, cache);
    EXPECT_FALSE(out["E"].llm_precision);
    EXPECT_FALSE(out["E"].llm_score);
    EXPECT_FALSE(out["E"].llm_recall);
    EXPECT_EQ(*out["S"].llm_precision, 0.0);
    EXPECT_FALSE(out["S"].llm_recall);
}

TEST(JudgeMetrics, FullRecallWhenRelevantUnionIsCovered)
{
    auto tax = p_taxonomy();
    std::mt19937_64 rng(2);
    for (int round = 0; round < 100; ++round) {
        std::set<std::string> rel;
        for (int i = 1; i <= 4; ++i) {
            if (rng() % 2 == 0) {
                rel.insert("Type" + std::to_string(i));
            }
        }
        ScriptedJudge judge(rel);
        JudgeCache cache;
        std::vector<CoverageSet> systems;
        for (int s = 0; s < 3; ++s) {
            CoverageSet cs = coverage("s" + std::to_string(s), {});
            for (int i = 1; i <= 4; ++i) {
                if (rng() % 2 == 0) {
                    cs.entries.push_back(CoverageEntry{"p" + std::to_string(i), Grade::strong, 0.0, "DENSE"});
                }
            }
            systems.push_back(cs);
        }
        auto out = judge_metrics(Campaign{"c1", "T", ""}, systems, tax, judge, cache);
        PtSet relevant_union;
        for (const auto& s : systems) {
            for (const auto& id : s.pt_ids()) {
                if (rel.count(tax.at(id).type_name) != 0) {
                    relevant_union.insert(id);
                }
            }
        }
        for (const auto& s : systems) {
            auto ids = s.pt_ids();
            if (!relevant_union.empty()
                && std::includes(ids.begin(), ids.end(), relevant_union.begin(), relevant_union.end())) {
                EXPECT_EQ(*out[s.system_id].llm_recall, 1.0);
            }
        }
    }
}

TEST(JudgeMetrics, FailurePropagatesAndIsNotCached)
{
    auto tax = p_taxonomy();
    ScriptedJudge judge({"Type1"});
    judge.fail_on = "Type3";
    JudgeCache cache;
    EXPECT_THROW(judge_metrics(Campaign{"c1", "T", ""}, {coverage("S", {"p1", "p3"})}, tax, judge, cache),
                 ProviderUnavailable);
    EXPECT_EQ(cache.size(), 1u);  // p1 kept, p3 not cached
}

TEST(JudgeCacheTest, EachPairJudgedOnceAcrossThreads)
{
    JudgeCache cache;
    std::atomic<int> calls{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 20; ++i) {
                cache.get_or_judge("c", "p" + std::to_string(i % 5), "m", [&] {
                    ++calls;
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                    return Grade::weak;
                });
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    EXPECT_EQ(calls.load(), 5);
    EXPECT_EQ(cache.judged(), 5u);
}

TEST(JudgeCacheTest, KeyIncludesModel)
{
    JudgeCache cache;
    int calls = 0;
    auto fn = [&] {
        ++calls;
        return Grade::strong;
    };
    cache.get_or_judge("c", "p", "m1", fn);
    cache.get_or_judge("c", "p", "m2", fn);
    cache.get_or_judge("c", "p", "m1", fn);
    EXPECT_EQ(calls, 2);
}

TEST(JudgeCacheTest, SaveLoadRoundTrip)
{
    ptmap::testing::TempDir dir;
    JudgeCache cache;
    cache.get_or_judge("c2", "p1", "m", [] { return Grade::irrelevant; });
    cache.get_or_judge("c1", "p9", "m", [] { return Grade::strong; });
    cache.save(dir / "cache.jsonl");
    EXPECT_EQ(ptmap::testing::read_file(dir / "cache.jsonl"),
              "{\"campaign_id\":\"c1\",\"grade\":\"STRONG\",\"model_id\":\"m\",\"pt_id\":\"p9\"}\n"
              "{\"campaign_id\":\"c2\",\"grade\":\"IRRELEVANT\",\"model_id\":\"m\",\"pt_id\":\"p1\"}\n");

    JudgeCache loaded;
    loaded.load(dir / "cache.jsonl");
    int calls = 0;
    auto g = loaded.get_or_judge("c1", "p9", "m", [&] {
        ++calls;
        return Grade::irrelevant;
    });
    EXPECT_EQ(g, Grade::strong);
    EXPECT_EQ(calls, 0);
    EXPECT_EQ(loaded.judged(), 0u);

    loaded.load(dir / "absent.jsonl");  // a missing cache file is an empty cache
    ptmap::testing::write_file(dir / "bad.jsonl", R"({"campaign_id":"c","pt_id":"p","model_id":"m","grade":"MAYBE"})");
    EXPECT_THROW(loaded.load(dir / "bad.jsonl"), MalformedRecord);
}

TEST(Aggregate, MeanAndSampleStd)
{
    auto s = summarize({0.8, 1.0});
    EXPECT_EQ(s.n, 2u);
    EXPECT_NEAR(*s.mean, 0.9, 1e-15);
    EXPECT_NEAR(*s.std, std::sqrt(0.02), 1e-15);
    EXPECT_EQ(format_stat(s), "0.9000 ± 0.1414");

    s = summarize({0.75});
    EXPECT_FALSE(s.std);
    EXPECT_EQ(format_stat(s), "0.7500");
    EXPECT_EQ(format_stat(summarize({})), "--");

    Stat table_shape{2, 0.8934, 0.0825};
    EXPECT_EQ(format_stat(table_shape), "0.8934 ± 0.0825");
}

TEST(Aggregate, UndefinedValuesChangeOnlyN)
{
    MetricRow a;
    a.system_id = "S";
    a.campaign_id = "c1";
    a.precision = 0.5;
    a.recall = 1.0;
    MetricRow b = a;
    b.campaign_id = "c2";
    b.precision = 1.0;
    MetricRow undefined = a;
    undefined.campaign_id = "c3";
    undefined.precision.reset();

    auto r1 = aggregate({a, b});
    auto r2 = aggregate({a, b, undefined});
    EXPECT_EQ(r1.stat("S", "precision").mean, r2.stat("S", "precision").mean);
    EXPECT_EQ(r2.stat("S", "precision").n, 2u);
    EXPECT_EQ(r2.stat("S", "recall").n, 3u);
    EXPECT_EQ(r2.stat("S", "coherence").n, 0u);
    EXPECT_FALSE(r2.stat("S", "coherence").mean);
}

TEST(Report, TableLayout)
{
    MetricRow p1;
    p1.system_id = "pipeline";
    p1.campaign_id = "c1";
    p1.precision = 0.8;
    p1.recall = 1.0;
    p1.f1 = 0.8888888888888888;
    p1.coherence = 0.5;
    MetricRow p2 = p1;
    p2.campaign_id = "c2";
    p2.precision = 1.0;
    p2.f1 = 1.0;
    p2.coherence.reset();
    MetricRow b1;
    b1.system_id = "bm25";
    b1.campaign_id = "c1";
    b1.precision = 0.25;
    b1.recall = 0.5;
    b1.f1 = 1.0 / 3.0;

    auto report = aggregate({p1, p2, b1});
    EXPECT_EQ(report.systems, (std::vector<std::string>{"pipeline", "bm25"}));
    EXPECT_EQ(render_table(report),
              "Model     Precision        Recall           F1               Coherence\n"
              "----------------------------------------------------------------------\n"
              "pipeline  0.9000 ± 0.1414  1.0000 ± 0.0000  0.9444 ± 0.0786  0.5000\n"
              "bm25      0.2500           0.5000           0.3333           --\n");

    report.mode = EvalMode::judge;
    auto judge_header = render_table(report).substr(0, render_table(report).find('\n'));
    EXPECT_EQ(judge_header, "Model     Precision  Recall  F1  Coherence  LLM Score");
}

TEST(Report, JsonKeepsUndefinedAsNull)
{
    MetricRow r;
    r.system_id = "S";
    r.campaign_id = "c1";
    r.recall = 0.0;
    auto j = to_json(aggregate({r}));
    EXPECT_TRUE(j.at("rows").at(0).at("precision").is_null());
    EXPECT_EQ(j.at("rows").at(0).at("recall").get<double>(), 0.0);
    EXPECT_EQ(j.at("aggregates").at("S").at("recall").at("n").get<int>(), 1);
    EXPECT_TRUE(j.at("aggregates").at("S").at("recall").at("std").is_null());
}

#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptmap/checkpoint.hpp"
#include "ptmap/config.hpp"
#include "ptmap/evaluation.hpp"
#include "ptmap/fixtures.hpp"
#include "ptmap/index_io.hpp"
#include "ptmap/inference.hpp"
#include "ptmap/labeling.hpp"
#include "ptmap/report.hpp"

namespace ptmap::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kConfig = 2,
    kTaxonomy = 3,
    kProvider = 4,
    kAlignment = 5,
    kInput = 6,
};

inline int exit_code_for(const std::string& kind)
{
    static const std::map<std::string, int, std::less<>> codes = {
        {"ConfigError", kConfig},
        {"IndexMismatch", kConfig},
        {"TaxonomyError", kTaxonomy},
        {"DuplicateId", kTaxonomy},
        {"EmptyTaxonomy", kTaxonomy},
        {"ProviderError", kProvider},
        {"ProviderUnavailable", kProvider},
        {"Timeout", kProvider},
        {"EmptyResponse", kProvider},
        {"UnparseableResponse", kProvider},
        {"AlignmentError", kAlignment},
        {"UnknownCampaign", kAlignment},
        {"MalformedRecord", kInput},
        {"IoError", kInput},
        {"UnsortedEvents", kInput},
        {"InvalidEvent", kInput},
        {"UnknownPt", kInput},
        {"EmptyTruth", kInput},
        {"MissingEmbedding", kInput},
        {"DimensionMismatch", kInput},
    };
    auto it = codes.find(kind);
    return it == codes.end() ? kUnexpected : it->second;
}

struct Streams {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

/// Every taxonomy failure surfaces with the TaxonomyError kind.
inline Taxonomy load_config_taxonomy(const RunConfig& cfg)
{
    try {
        return load_taxonomy(cfg.taxonomy);
    } catch (const Error& e) {
        throw Error("TaxonomyError", "taxonomy '" + cfg.taxonomy.filename().string() + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// index

inline int cmd_index(const RunConfig& cfg, Streams io = {})
{
    const auto taxonomy = load_config_taxonomy(cfg);
    const auto embedder = make_embedder(cfg.providers.embedder);
    const auto dense = build_dense_index(taxonomy, *embedder, cfg.parallelism);
    const auto bm25 = bm25_build(taxonomy, cfg.bm25);
    fs::create_directories(cfg.output_dir);
    jsonl::write_atomic(cfg.dense_index_path(), serialize_dense_index(dense));
    jsonl::write_atomic(cfg.bm25_index_path(), serialize_bm25_index(bm25));
    io.out << "indexed " << taxonomy.size() << " PTs (dimension " << dense.dimension() << ")\n";
    return kOk;
}

/// Taxonomy plus both persisted indexes, validated against the config.
struct Workspace {
    Taxonomy taxonomy;
    DenseIndex dense;
    Bm25Index bm25;
};

inline Workspace load_workspace(const RunConfig& cfg)
{
    auto taxonomy = load_config_taxonomy(cfg);
    for (const auto& p : {cfg.dense_index_path(), cfg.bm25_index_path()}) {
        if (!fs::exists(p)) {
            throw ConfigError("index", "missing '" + p.filename().string() + "'; run the index command first");
        }
    }
    auto dense = load_dense_index(cfg.dense_index_path(), cfg.providers.embedder.model_id,
                                  cfg.providers.embedder.dimension);
    auto bm25 = load_bm25_index(cfg.bm25_index_path(), cfg.bm25);
    if (dense.size() != taxonomy.size()) {
        throw IndexMismatch("dense index holds " + std::to_string(dense.size()) + " PTs, taxonomy has "
                            + std::to_string(taxonomy.size()) + "; rebuild the index");
    }
    for (const auto& node : taxonomy) {
        if (dense.find(node.id) == nullptr) {
            throw IndexMismatch("dense index lacks PT '" + node.id + "'; rebuild the index");
        }
    }
    return Workspace{std::move(taxonomy), std::move(dense), std::move(bm25)};
}

/// Providers instantiated from a config. The selector is only built when it
/// is configured differently from the classifier.
struct Providers {
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<LanguageModel> interpreter;
    std::unique_ptr<LanguageModel> classifier;
    std::unique_ptr<LanguageModel> selector;
    std::unique_ptr<PairScorer> reranker;

    explicit Providers(const RunConfig& cfg)
        : embedder(make_embedder(cfg.providers.embedder)),
          interpreter(make_language_model(cfg.providers.interpreter)),
          classifier(make_language_model(cfg.providers.classifier)),
          selector(make_language_model(cfg.providers.selector)),
          reranker(make_pair_scorer(cfg.providers.reranker))
    {}

    [[nodiscard]] InferenceContext context(const Workspace& ws) const
    {
        return InferenceContext{&ws.taxonomy,        &ws.dense,     &ws.bm25,       embedder.get(),
                                interpreter.get(),   classifier.get(), selector.get(), reranker.get()};
    }
};

inline PipelineConfig pipeline_config(const RunConfig& cfg)
{
    PipelineConfig p;
    p.tau = cfg.tau;
    p.use_reranker = cfg.rerank_enabled;
    p.rerank_cutoff = cfg.rerank_cutoff;
    p.classify_parallelism = 1;
    return p;
}

// ---------------------------------------------------------------------------
// map

/// Parsed system name: a baseline, the full pipeline, or an ablation variant.
struct SystemSpec {
    std::string id;
    std::string kind;  // pipeline | bm25 | zero_shot | dense | variant
    double tau = 0.0;
};

inline SystemSpec parse_system(const std::string& name)
{
    if (name == kPipelineSystem || name == kBm25System || name == kZeroShotSystem) {
        return SystemSpec{name, name, 0.0};
    }
    for (auto v : kAblationVariants) {
        if (name == v) {
            return SystemSpec{name, "variant", 0.0};
        }
    }
    if (name.rfind("dense@", 0) == 0) {
        const auto raw = name.substr(6);
        std::size_t used = 0;
        double tau = 0.0;
        try {
            tau = std::stod(raw, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != raw.size() || !(tau >= -1.0 && tau <= 1.0)) {
            throw ConfigError("system", "bad threshold in '" + name + "'; expected dense@<tau> with tau in [-1, 1]");
        }
        return SystemSpec{dense_system_id(tau), "dense", tau};
    }
    throw ConfigError("system", "unknown system '" + name
                                    + "'; expected pipeline, bm25, zero_shot, dense@<tau> or an ablation variant");
}

/// Runs one named system on one campaign.
inline CoverageSet map_campaign(const SystemSpec& system, const Campaign& campaign, const InferenceContext& ctx,
                                const RunConfig& cfg)
{
    auto pcfg = pipeline_config(cfg);
    if (system.kind == "pipeline") {
        return run_pipeline(campaign, ctx, pcfg);
    }
    if (system.kind == "bm25") {
        return baseline_bm25(campaign, *ctx.bm25, cfg.bm25_top_k);
    }
    if (system.kind == "zero_shot") {
        return baseline_zero_shot(campaign, *ctx.taxonomy, detail::require(ctx.selector, "providers.selector"),
                                  cfg.zero_shot_chunk_size);
    }
    if (system.kind == "dense") {
        return baseline_dense(campaign, *ctx.dense, *ctx.embedder, system.tau);
    }
    if (system.id == kAblationVariants[0]) {
        return baseline_dense(campaign, *ctx.dense, *ctx.embedder, cfg.tau, system.id);
    }
    pcfg.use_reranker = system.id == kAblationVariants[3];
    auto trace = trace_pipeline(campaign, ctx, pcfg);
    if (system.id == kAblationVariants[1]) {
        auto cov = detail::uniform_coverage(campaign, system.id, trace.retrieved);
        cov.interpretation = trace.interpretation.summary;
        return cov;
    }
    return coverage_from_trace(campaign, system.id, trace);
}

inline fs::path default_coverage_path(const RunConfig& cfg, const std::string& system_id)
{
    return cfg.output_dir / ("coverage_" + system_id + ".jsonl");
}

struct MapOptions {
    fs::path campaigns;
    std::string system = std::string(kPipelineSystem);
    std::optional<fs::path> output;
    bool continue_on_error = false;
};

inline int cmd_map(const RunConfig& cfg, const MapOptions& opts, Streams io = {})
{
    const auto system = parse_system(opts.system);
    const auto campaigns = load_campaigns(opts.campaigns);
    const auto ws = load_workspace(cfg);
    const Providers providers(cfg);
    const auto ctx = providers.context(ws);

    const auto output = opts.output ? *opts.output : default_coverage_path(cfg, system.id);
    CoverageCheckpoint checkpoint(output, system.id);
    BatchOptions batch{cfg.parallelism, opts.continue_on_error};
    auto result = run_batch(
        campaigns, checkpoint, [&](const Campaign& c) { return map_campaign(system, c, ctx, cfg); }, batch, io.err);
    io.err << "mapped " << result.computed << " campaigns with " << system.id << " (" << result.skipped
           << " resumed, " << result.failed << " failed)\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// label

struct LabelOptions {
    fs::path coverage;
    fs::path exposures;
    fs::path purchases;
    std::optional<fs::path> output;
};

inline int cmd_label(const RunConfig& cfg, const LabelOptions& opts, Streams io = {})
{
    const auto taxonomy = load_config_taxonomy(cfg);
    const auto coverage = load_coverage(opts.coverage, &taxonomy);
    const auto exposures = load_exposures(opts.exposures);
    const auto purchases = load_purchases(opts.purchases);
    const auto labels = build_labels(coverage_map(coverage), exposures, purchases, cfg.window, &taxonomy);

    std::vector<jsonl::json> rows;
    rows.reserve(labels.size());
    for (const auto& l : labels) {
        rows.push_back(to_json(l));
    }
    fs::create_directories(cfg.output_dir);
    jsonl::write_records(opts.output ? *opts.output : cfg.output_dir / "labels.jsonl", rows);
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.4f", positive_rate(labels));
    io.out << "labels " << labels.size() << ", positive rate " << rate << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// eval

using TruthMap = std::map<std::string, PtSet>;

/// Truth JSONL: `{"campaign_id","pt_ids":[...]}`, non-empty, resolving in the taxonomy.
inline TruthMap load_truth(const fs::path& path, const Taxonomy& taxonomy)
{
    TruthMap truth;
    jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
        auto campaign = jsonl::require_string(obj, "campaign_id", line);
        auto ids = jsonl::require_string_array(obj, "pt_ids", line);
        if (ids.empty()) {
            throw EmptyTruth();
        }
        for (const auto& id : ids) {
            if (!taxonomy.contains(id)) {
                throw UnknownPt(id);
            }
        }
        if (!truth.emplace(campaign, PtSet(ids.begin(), ids.end())).second) {
            throw MalformedRecord(line, "duplicate truth for campaign '" + campaign + "'");
        }
    });
    return truth;
}

/// Coverage grouped by system (in file order) and campaign.
struct SystemCoverage {
    std::vector<std::string> order;
    std::map<std::string, std::map<std::string, CoverageSet>> by_system;
    std::vector<std::string> campaigns;  // first-appearance order across systems
};

inline SystemCoverage group_coverage(const std::vector<fs::path>& files, const Taxonomy& taxonomy)
{
    SystemCoverage out;
    std::set<std::string> seen_campaigns;
    for (const auto& f : files) {
        for (auto& cov : load_coverage(f, &taxonomy)) {
            if (!out.by_system.contains(cov.system_id)) {
                out.order.push_back(cov.system_id);
            }
            if (seen_campaigns.insert(cov.campaign_id).second) {
                out.campaigns.push_back(cov.campaign_id);
            }
            auto& per = out.by_system[cov.system_id];
            const auto campaign = cov.campaign_id;
            if (!per.emplace(campaign, std::move(cov)).second) {
                throw AlignmentError("system '" + out.order.back() + "' has two coverage records for campaign '"
                                     + campaign + "'");
            }
        }
    }
    for (const auto& system : out.order) {
        for (const auto& c : out.campaigns) {
            if (!out.by_system[system].contains(c)) {
                throw AlignmentError("system '" + system + "' has no coverage for campaign '" + c + "'");
            }
        }
    }
    return out;
}

struct EvalOptions {
    EvalMode mode = EvalMode::human;
    std::vector<fs::path> coverage;
    std::optional<fs::path> truth;
    std::optional<fs::path> campaigns;
    std::optional<fs::path> output;  // report JSON; the table goes next to it as .txt
};

inline std::map<std::string, Campaign> campaigns_by_id(const fs::path& path)
{
    std::map<std::string, Campaign> out;
    for (auto& c : load_campaigns(path)) {
        auto id = c.id;
        out.emplace(std::move(id), std::move(c));
    }
    return out;
}

/// Judge-mode metric rows for a set of systems, plus the human-vs-judge
/// Jaccard per campaign when truth is supplied.
inline std::vector<MetricRow> judge_rows(const SystemCoverage& grouped, const std::map<std::string, Campaign>& campaigns,
                                         const Workspace& ws, const LanguageModel& judge, JudgeCache& cache,
                                         const TruthMap* truth, std::vector<double>* agreement)
{
    std::vector<MetricRow> rows;
    for (const auto& campaign_id : grouped.campaigns) {
        auto cit = campaigns.find(campaign_id);
        if (cit == campaigns.end()) {
            throw AlignmentError("campaign '" + campaign_id + "' is in coverage but not in the campaigns file");
        }
        const auto& campaign = cit->second;
        std::vector<CoverageSet> systems;
        for (const auto& s : grouped.order) {
            systems.push_back(grouped.by_system.at(s).at(campaign_id));
        }
        std::map<std::string, JudgeMetrics> metrics;
        try {
            metrics = judge_metrics(campaign, systems, ws.taxonomy, judge, cache);
        } catch (const Error& e) {
            rethrow_with_context(e, "judging campaign '" + campaign_id + "'");
        }
        for (const auto& s : systems) {
            const auto& m = metrics.at(s.system_id);
            MetricRow row;
            row.system_id = s.system_id;
            row.campaign_id = campaign_id;
            row.llm_precision = m.llm_precision;
            row.llm_recall = m.llm_recall;
            row.llm_f1 = harmonic_mean(m.llm_precision, m.llm_recall);
            row.llm_score = m.llm_score;
            row.coherence = coherence(s.pt_ids(), ws.dense);
            rows.push_back(std::move(row));
        }
        if (truth != nullptr && agreement != nullptr) {
            auto tit = truth->find(campaign_id);
            if (tit != truth->end()) {
                PtSet pool = tit->second;
                for (const auto& s : systems) {
                    auto ids = s.pt_ids();
                    pool.insert(ids.begin(), ids.end());
                }
                agreement->push_back(
                    jaccard_agreement(tit->second, judge_relevant(campaign, pool, ws.taxonomy, judge, cache)));
            }
        }
    }
    return rows;
}

inline void write_report(const EvalReport& report, const jsonl::json& extra, const fs::path& json_path, Streams io)
{
    auto doc = to_json(report);
    for (const auto& [k, v] : extra.items()) {
        doc[k] = v;
    }
    if (json_path.has_parent_path()) {
        fs::create_directories(json_path.parent_path());
    }
    jsonl::write_atomic(json_path, doc.dump(2) + "\n");
    auto table = render_table(report);
    auto table_path = json_path;
    table_path.replace_extension(".txt");
    jsonl::write_atomic(table_path, table);
    io.out << table;
}

inline int cmd_eval(const RunConfig& cfg, const EvalOptions& opts, Streams io = {})
{
    if (opts.coverage.empty()) {
        throw ConfigError("eval.coverage", "at least one coverage file is required");
    }
    const auto ws = load_workspace(cfg);
    const auto grouped = group_coverage(opts.coverage, ws.taxonomy);
    std::optional<TruthMap> truth;
    if (opts.truth) {
        truth = load_truth(*opts.truth, ws.taxonomy);
    }

    EvalReport report;
    if (opts.mode == EvalMode::human) {
        if (!truth) {
            throw ConfigError("eval.truth", "human mode requires a truth file");
        }
        std::vector<MetricRow> rows;
        for (const auto& campaign_id : grouped.campaigns) {
            auto tit = truth->find(campaign_id);
            if (tit == truth->end()) {
                throw AlignmentError("campaign '" + campaign_id + "' has coverage but no truth");
            }
            for (const auto& s : grouped.order) {
                const auto pred = grouped.by_system.at(s).at(campaign_id).pt_ids();
                auto m = precision_recall_f1(pred, tit->second);
                MetricRow row;
                row.system_id = s;
                row.campaign_id = campaign_id;
                row.precision = m.precision;
                row.recall = m.recall;
                row.f1 = m.f1;
                row.coherence = coherence(pred, ws.dense);
                rows.push_back(std::move(row));
            }
        }
        report = aggregate(std::move(rows), EvalMode::human);
    } else {
        if (!opts.campaigns) {
            throw ConfigError("eval.campaigns", "judge mode requires the campaigns file");
        }
        const auto campaigns = campaigns_by_id(*opts.campaigns);
        const auto judge = make_language_model(cfg.providers.judge);
        JudgeCache cache;
        const auto cache_path = cfg.judge_cache_path();
        cache.load(cache_path);
        std::vector<double> agreement;
        std::vector<MetricRow> rows;
        try {
            rows = judge_rows(grouped, campaigns, ws, *judge, cache, truth ? &*truth : nullptr, &agreement);
        } catch (...) {
            cache.save(cache_path);
            throw;
        }
        cache.save(cache_path);
        report = aggregate(std::move(rows), EvalMode::judge);
        if (truth) {
            report.agreement = summarize(agreement);
        }
    }
    const auto out = opts.output ? *opts.output : cfg.output_dir / ("report_" + std::string(to_string(opts.mode)) + ".json");
    write_report(report, jsonl::json::object(), out, io);
    return kOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOptions {
    fs::path campaigns;
    std::optional<fs::path> output_dir;  // defaults to <output_dir>/ablation
};

inline int cmd_ablate(const RunConfig& cfg, const AblateOptions& opts, Streams io = {})
{
    const auto campaigns = load_campaigns(opts.campaigns);
    const auto ws = load_workspace(cfg);
    const Providers providers(cfg);
    const auto ctx = providers.context(ws);
    const auto pcfg = pipeline_config(cfg);
    const auto dir = opts.output_dir ? *opts.output_dir : cfg.output_dir / "ablation";
    fs::create_directories(dir);

    std::map<std::string, std::vector<jsonl::json>> records;
    SystemCoverage grouped;
    for (auto v : kAblationVariants) {
        grouped.order.emplace_back(v);
    }
    jsonl::json containment = jsonl::json::object();
    bool all_contained = true;
    for (const auto& c : campaigns) {
        auto sets = run_ablation(c, ctx, pcfg);
        const auto filtered = sets[2].pt_ids();
        const auto retrieved = sets[1].pt_ids();
        const bool contained = std::includes(retrieved.begin(), retrieved.end(), filtered.begin(), filtered.end());
        containment[c.id] = contained;
        all_contained = all_contained && contained;
        grouped.campaigns.push_back(c.id);
        for (auto& s : sets) {
            records[s.system_id].push_back(to_json(s));
            grouped.by_system[s.system_id].emplace(c.id, std::move(s));
        }
    }
    for (auto v : kAblationVariants) {
        jsonl::write_records(dir / ("coverage_" + std::string(v) + ".jsonl"), records[std::string(v)]);
    }

    std::map<std::string, Campaign> by_id;
    for (const auto& c : campaigns) {
        by_id.emplace(c.id, c);
    }
    const auto judge = make_language_model(cfg.providers.judge);
    JudgeCache cache;
    const auto cache_path = cfg.judge_cache_path();
    cache.load(cache_path);
    std::vector<MetricRow> rows;
    try {
        rows = judge_rows(grouped, by_id, ws, *judge, cache, nullptr, nullptr);
    } catch (...) {
        cache.save(cache_path);
        throw;
    }
    cache.save(cache_path);
    auto report = aggregate(std::move(rows), EvalMode::judge);
    jsonl::json extra = {{"variants", grouped.order},
                         {"containment", {{"subset", std::string(kAblationVariants[2]) + " <= "
                                                         + std::string(kAblationVariants[1])},
                                          {"holds", all_contained},
                                          {"per_campaign", containment}}}};
    write_report(report, extra, dir / "report.json", io);
    return all_contained ? kOk : kUnexpected;
}

// ---------------------------------------------------------------------------
// fixtures

inline int cmd_fixtures(const fs::path& dir, const fixtures::FixtureOptions& opts, Streams io = {})
{
    const auto fx = fixtures::generate(opts);
    fixtures::write(fx, opts, dir);
    io.out << "wrote fixture v" << fixtures::kFixtureVersion << ": " << fx.taxonomy.size() << " PTs, "
           << fx.campaigns.size() << " campaigns, " << fx.exposures.size() << " exposures, " << fx.purchases.size()
           << " purchases\n";
    return kOk;
}

}  // namespace ptmap::cli

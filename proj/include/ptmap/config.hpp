#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "ptmap/error.hpp"
#include "ptmap/http_providers.hpp"
#include "ptmap/jsonl.hpp"
#include "ptmap/labeling.hpp"
#include "ptmap/mock_providers.hpp"
#include "ptmap/prompts.hpp"
#include "ptmap/provider_config.hpp"
#include "ptmap/retrieval.hpp"

namespace ptmap {

struct ProviderSet {
    ProviderConfig embedder;
    ProviderConfig interpreter;
    ProviderConfig classifier;
    ProviderConfig judge;
    ProviderConfig reranker;
    ProviderConfig selector;
};

/// Everything a CLI run needs. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
    std::filesystem::path taxonomy;
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> judge_cache;
    ProviderSet providers;
    double tau = 0.3;
    Bm25Params bm25;
    std::size_t bm25_top_k = 100;
    bool rerank_enabled = true;
    std::optional<std::size_t> rerank_cutoff;
    std::size_t zero_shot_chunk_size = 200;
    AttributionWindow window = kDefaultWindowMs;
    std::size_t parallelism = 1;
    std::uint64_t seed = 0;

    [[nodiscard]] std::filesystem::path judge_cache_path() const
    {
        return judge_cache ? *judge_cache : output_dir / "judge_cache.jsonl";
    }
    [[nodiscard]] std::filesystem::path dense_index_path() const { return output_dir / "dense_index.jsonl"; }
    [[nodiscard]] std::filesystem::path bm25_index_path() const { return output_dir / "bm25_index.json"; }
};

namespace config_detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> known)
{
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto k : known) {
            ok = ok || key == k;
        }
        if (!ok) {
            throw ConfigError(path + "." + key, "unknown key");
        }
    }
}

inline const json& object_at(const json& obj, const std::string& key, const std::string& path)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_object()) {
        throw ConfigError(path + "." + key, "expected an object");
    }
    return *it;
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path, std::string fallback)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        return fallback;
    }
    if (!it->is_string()) {
        throw ConfigError(path + "." + key, "expected a string");
    }
    return it->get<std::string>();
}

inline double get_number(const json& obj, const std::string& key, const std::string& path, double fallback)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        return fallback;
    }
    if (!it->is_number()) {
        throw ConfigError(path + "." + key, "expected a number");
    }
    return it->get<double>();
}

inline std::int64_t get_int(const json& obj, const std::string& key, const std::string& path, std::int64_t fallback,
                            std::int64_t min_value)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        return fallback;
    }
    if (!it->is_number_integer()) {
        throw ConfigError(path + "." + key, "expected an integer");
    }
    auto v = it->get<std::int64_t>();
    if (v < min_value) {
        throw ConfigError(path + "." + key, "must be >= " + std::to_string(min_value));
    }
    return v;
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& path, bool fallback)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        return fallback;
    }
    if (!it->is_boolean()) {
        throw ConfigError(path + "." + key, "expected a boolean");
    }
    return it->get<bool>();
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline ProviderConfig parse_provider(const json& obj, const std::string& path, const std::filesystem::path& base,
                                     std::uint64_t default_seed)
{
    reject_unknown(obj, path,
                   {"kind", "model_id", "endpoint", "timeout_ms", "max_retries", "backoff_ms", "seed", "dimension",
                    "lexicon", "token_env", "batch_size", "prompts"});
    ProviderConfig cfg;
    const auto kind = get_string(obj, "kind", path, "mock");
    if (kind == "mock") {
        cfg.kind = ProviderKind::mock;
    } else if (kind == "http") {
        cfg.kind = ProviderKind::http;
    } else {
        throw ConfigError(path + ".kind", "expected 'mock' or 'http', got '" + kind + "'");
    }
    cfg.model_id = get_string(obj, "model_id", path, "");
    if (cfg.model_id.empty()) {
        throw ConfigError(path + ".model_id", "required");
    }
    cfg.endpoint = get_string(obj, "endpoint", path, "");
    if (cfg.kind == ProviderKind::http && cfg.endpoint.empty()) {
        throw ConfigError(path + ".endpoint", "required for http providers");
    }
    cfg.timeout_ms = static_cast<int>(get_int(obj, "timeout_ms", path, cfg.timeout_ms, 1));
    cfg.max_retries = static_cast<int>(get_int(obj, "max_retries", path, cfg.max_retries, 0));
    cfg.backoff_ms = static_cast<int>(get_int(obj, "backoff_ms", path, cfg.backoff_ms, 0));
    cfg.seed = static_cast<std::uint64_t>(
        get_int(obj, "seed", path, static_cast<std::int64_t>(default_seed), std::numeric_limits<std::int64_t>::min()));
    cfg.dimension = static_cast<std::size_t>(get_int(obj, "dimension", path, 256, 1));
    cfg.batch_size = static_cast<std::size_t>(get_int(obj, "batch_size", path, 1, 1));
    cfg.token_env = get_string(obj, "token_env", path, "");
    if (auto lex = get_string(obj, "lexicon", path, ""); !lex.empty()) {
        cfg.lexicon = resolve(base, lex).string();
        if (!std::filesystem::exists(cfg.lexicon)) {
            throw ConfigError(path + ".lexicon", "file not found: " + cfg.lexicon);
        }
    }
    if (auto it = obj.find("prompts"); it != obj.end()) {
        if (!it->is_object()) {
            throw ConfigError(path + ".prompts", "expected an object");
        }
        for (const auto& [role, tmpl] : it->items()) {
            if (!prompts::is_role(role)) {
                throw ConfigError(path + ".prompts." + role, "unknown prompt role");
            }
            if (!tmpl.is_string()) {
                throw ConfigError(path + ".prompts." + role, "expected a string");
            }
            cfg.prompts[role] = tmpl.get<std::string>();
        }
    }
    return cfg;
}

}  // namespace config_detail

/// Parses and validates a config document. `base` anchors relative paths.
inline RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base)
{
    using namespace config_detail;
    if (!doc.is_object()) {
        throw ConfigError("config", "expected a JSON object");
    }
    reject_unknown(doc, "config",
                   {"taxonomy", "output_dir", "judge_cache", "providers", "tau", "bm25", "rerank", "zero_shot", "label",
                    "parallelism", "seed"});
    RunConfig cfg;
    auto taxonomy = get_string(doc, "taxonomy", "config", "");
    if (taxonomy.empty()) {
        throw ConfigError("config.taxonomy", "required");
    }
    cfg.taxonomy = resolve(base, taxonomy);
    if (!std::filesystem::exists(cfg.taxonomy)) {
        throw ConfigError("config.taxonomy", "file not found: " + cfg.taxonomy.string());
    }
    cfg.output_dir = resolve(base, get_string(doc, "output_dir", "config", "out"));
    if (auto jc = get_string(doc, "judge_cache", "config", ""); !jc.empty()) {
        cfg.judge_cache = resolve(base, jc);
    }
    cfg.seed = static_cast<std::uint64_t>(get_int(doc, "seed", "config", 0, 0));
    cfg.tau = get_number(doc, "tau", "config", cfg.tau);
    if (!(cfg.tau >= -1.0 && cfg.tau <= 1.0)) {
        throw ConfigError("config.tau", "must lie in [-1, 1]");
    }
    cfg.parallelism = static_cast<std::size_t>(get_int(doc, "parallelism", "config", 1, 1));

    if (doc.contains("bm25")) {
        const auto& b = object_at(doc, "bm25", "config");
        reject_unknown(b, "config.bm25", {"k1", "b", "top_k"});
        cfg.bm25.k1 = get_number(b, "k1", "config.bm25", cfg.bm25.k1);
        cfg.bm25.b = get_number(b, "b", "config.bm25", cfg.bm25.b);
        cfg.bm25_top_k = static_cast<std::size_t>(get_int(b, "top_k", "config.bm25", 100, 1));
        if (!(cfg.bm25.k1 > 0.0)) {
            throw ConfigError("config.bm25.k1", "must be > 0");
        }
        if (!(cfg.bm25.b >= 0.0 && cfg.bm25.b <= 1.0)) {
            throw ConfigError("config.bm25.b", "must lie in [0, 1]");
        }
    }
    if (doc.contains("rerank")) {
        const auto& r = object_at(doc, "rerank", "config");
        reject_unknown(r, "config.rerank", {"enabled", "cutoff"});
        cfg.rerank_enabled = get_bool(r, "enabled", "config.rerank", true);
        if (auto it = r.find("cutoff"); it != r.end() && !it->is_null()) {
            cfg.rerank_cutoff = static_cast<std::size_t>(get_int(r, "cutoff", "config.rerank", 1, 1));
        }
    }
    if (doc.contains("zero_shot")) {
        const auto& z = object_at(doc, "zero_shot", "config");
        reject_unknown(z, "config.zero_shot", {"chunk_size"});
        cfg.zero_shot_chunk_size = static_cast<std::size_t>(get_int(z, "chunk_size", "config.zero_shot", 200, 1));
    }
    if (doc.contains("label")) {
        const auto& l = object_at(doc, "label", "config");
        reject_unknown(l, "config.label", {"window"});
        if (auto it = l.find("window"); it != l.end()) {
            if (it->is_number_integer()) {
                auto ms = it->get<std::int64_t>();
                if (ms <= 0) {
                    throw ConfigError("config.label.window", "must be positive");
                }
                cfg.window = ms;
            } else if (it->is_string()) {
                try {
                    cfg.window = parse_window(it->get<std::string>());
                } catch (const ConfigError& e) {
                    std::string msg = e.what();
                    throw ConfigError("config.label.window", msg.substr(msg.find(": ") + 2));
                }
            } else {
                throw ConfigError("config.label.window", "expected milliseconds or a duration string");
            }
        }
    }

    const auto& providers = object_at(doc, "providers", "config");
    reject_unknown(providers, "config.providers",
                   {"embedder", "interpreter", "classifier", "judge", "reranker", "selector"});
    auto provider = [&](const std::string& name) {
        return parse_provider(object_at(providers, name, "config.providers"), "config.providers." + name, base,
                              cfg.seed);
    };
    cfg.providers.embedder = provider("embedder");
    cfg.providers.interpreter = provider("interpreter");
    cfg.providers.classifier = provider("classifier");
    cfg.providers.judge = provider("judge");
    cfg.providers.reranker = provider("reranker");
    cfg.providers.selector = providers.contains("selector") ? provider("selector") : cfg.providers.classifier;
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config", "cannot read '" + path.string() + "'");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

// ---------------------------------------------------------------------------
// Provider construction

inline std::unique_ptr<Embedder> make_embedder(const ProviderConfig& cfg)
{
    if (cfg.kind == ProviderKind::http) {
        return std::make_unique<http::HttpEmbedder>(cfg);
    }
    return std::make_unique<mock::LexicalEmbedder>(cfg.model_id, cfg.dimension, cfg.seed);
}

inline std::unique_ptr<PairScorer> make_pair_scorer(const ProviderConfig& cfg)
{
    if (cfg.kind == ProviderKind::http) {
        return std::make_unique<http::HttpPairScorer>(cfg);
    }
    return std::make_unique<mock::OverlapScorer>(cfg.model_id);
}

inline std::unique_ptr<LanguageModel> make_language_model(const ProviderConfig& cfg)
{
    if (cfg.kind == ProviderKind::http) {
        return std::make_unique<http::HttpLanguageModel>(cfg);
    }
    mock::Lexicon lexicon;
    if (!cfg.lexicon.empty()) {
        lexicon = mock::load_lexicon(cfg.lexicon);
    }
    return std::make_unique<mock::RuleModel>(cfg.model_id, std::move(lexicon));
}

}  // namespace ptmap

#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ptmap/error.hpp"
#include "ptmap/prompts.hpp"
#include "ptmap/provider_config.hpp"
#include "ptmap/providers.hpp"

namespace ptmap::http {

using json = nlohmann::json;

/// JSON-over-HTTP POST with bounded exponential-backoff retries.
///
/// Connection failures, timeouts, 429 and 5xx are retried up to
/// `max_retries` times. Other 4xx responses fail immediately. Once retries are
/// exhausted the call raises Timeout (if the last attempt timed out) or
/// ProviderUnavailable. A 2xx body that is not JSON raises
/// UnparseableResponse and is not retried.
class Transport {
  public:
    explicit Transport(const ProviderConfig& cfg)
        : m_timeout_ms(cfg.timeout_ms), m_max_retries(cfg.max_retries), m_backoff_ms(cfg.backoff_ms)
    {
        const auto& url = cfg.endpoint;
        auto scheme_end = url.find("://");
        if (url.empty() || scheme_end == std::string::npos) {
            throw ConfigError("endpoint", "expected an absolute http(s) URL, got '" + url + "'");
        }
        auto path_start = url.find('/', scheme_end + 3);
        m_base = url.substr(0, path_start);
        m_path = path_start == std::string::npos ? "/" : url.substr(path_start);
        if (!cfg.token_env.empty()) {
            if (const char* token = std::getenv(cfg.token_env.c_str()); token != nullptr && *token) {
                m_headers.emplace("Authorization", std::string("Bearer ") + token);
            }
        }
    }

    [[nodiscard]] json post(const json& body) const
    {
        const auto payload = body.dump();
        bool last_timed_out = false;
        std::string last_error = "no attempt made";
        for (int attempt = 0; attempt <= m_max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(m_backoff_ms << (attempt - 1)));
            }
            httplib::Client client(m_base);
            const auto timeout = std::chrono::milliseconds(m_timeout_ms);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);

            const auto started = std::chrono::steady_clock::now();
            auto res = client.Post(m_path, m_headers, payload, "application/json");
            const auto elapsed = std::chrono::steady_clock::now() - started;

            if (!res) {
                last_timed_out = res.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout;
                last_error = httplib::to_string(res.error());
                continue;
            }
            last_timed_out = false;
            if (res->status >= 200 && res->status < 300) {
                try {
                    return json::parse(res->body);
                } catch (const json::parse_error&) {
                    throw UnparseableResponse(res->body);
                }
            }
            last_error = "HTTP " + std::to_string(res->status);
            if (res->status != 429 && res->status < 500) {
                throw ProviderUnavailable(m_base + m_path + ": " + last_error);
            }
        }
        const auto what = m_base + m_path + ": " + last_error + " after "
            + std::to_string(m_max_retries + 1) + " attempt(s)";
        if (last_timed_out) {
            throw Timeout(what);
        }
        throw ProviderUnavailable(what);
    }

  private:
    std::string m_base;
    std::string m_path;
    httplib::Headers m_headers;
    int m_timeout_ms;
    int m_max_retries;
    int m_backoff_ms;
};

/// Request `{"model", "input": [text]}`, response `{"embeddings": [[...]]}`.
class HttpEmbedder final : public Embedder {
  public:
    explicit HttpEmbedder(const ProviderConfig& cfg)
        : m_transport(cfg), m_model_id(cfg.model_id), m_dimension(cfg.dimension)
    {}

    [[nodiscard]] const std::string& model_id() const override { return m_model_id; }
    [[nodiscard]] std::size_t dimension() const override { return m_dimension; }

    [[nodiscard]] EmbeddingVector embed(std::string_view input) const override
    {
        if (text::normalize_whitespace(input).empty()) {
            return EmbeddingVector{std::vector<double>(m_dimension, 0.0)};
        }
        auto res = m_transport.post({{"model", m_model_id}, {"input", json::array({input})}});
        auto it = res.find("embeddings");
        if (it == res.end() || !it->is_array() || it->size() != 1 || !(*it)[0].is_array()) {
            throw UnparseableResponse(res.dump());
        }
        EmbeddingVector v;
        for (const auto& x : (*it)[0]) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw UnparseableResponse(res.dump());
            }
            v.values.push_back(x.get<double>());
        }
        if (v.dimension() != m_dimension) {
            throw DimensionMismatch(m_dimension, v.dimension());
        }
        l2_normalize(v);
        return v;
    }

  private:
    Transport m_transport;
    std::string m_model_id;
    std::size_t m_dimension;
};

/// Request `{"model", "query", "documents": [doc]}`, response `{"scores": [x]}`.
class HttpPairScorer final : public PairScorer {
  public:
    explicit HttpPairScorer(const ProviderConfig& cfg) : m_transport(cfg), m_model_id(cfg.model_id) {}

    [[nodiscard]] const std::string& model_id() const override { return m_model_id; }

    [[nodiscard]] double score(std::string_view query, std::string_view document) const override
    {
        auto res = m_transport.post(
            {{"model", m_model_id}, {"query", query}, {"documents", json::array({document})}});
        auto it = res.find("scores");
        if (it == res.end() || !it->is_array() || it->size() != 1 || !(*it)[0].is_number()) {
            throw UnparseableResponse(res.dump());
        }
        double s = (*it)[0].get<double>();
        if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
            throw UnparseableResponse(res.dump());
        }
        return s;
    }

  private:
    Transport m_transport;
    std::string m_model_id;
};

/// Extracts the single number in a free-text answer. Zero or several numbers,
/// or a value outside [0, 1], is unparseable.
inline double parse_unit_score(std::string_view raw)
{
    static const std::regex number(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
    const std::string s(raw);
    auto begin = std::sregex_iterator(s.begin(), s.end(), number);
    auto end = std::sregex_iterator();
    if (std::distance(begin, end) != 1) {
        throw UnparseableResponse(s);
    }
    double value = std::strtod(begin->str().c_str(), nullptr);
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
        throw UnparseableResponse(s);
    }
    return value;
}

/// One grade word per non-blank line, in order.
inline std::vector<Grade> parse_grade_lines(std::string_view raw, std::size_t expected)
{
    std::vector<Grade> grades;
    std::size_t start = 0;
    while (start <= raw.size()) {
        auto nl = raw.find('\n', start);
        auto line = raw.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (!text::normalize_whitespace(line).empty()) {
            grades.push_back(parse_grade(line));
        }
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    if (grades.size() != expected) {
        throw UnparseableResponse(std::string(raw));
    }
    return grades;
}

/// Prompted completion model. Request `{"model", "prompt"}`, response
/// `{"output": text}`.
class HttpLanguageModel final : public LanguageModel {
  public:
    explicit HttpLanguageModel(const ProviderConfig& cfg)
        : m_transport(cfg), m_model_id(cfg.model_id), m_batch_size(cfg.batch_size == 0 ? 1 : cfg.batch_size)
    {
        m_templates.apply(cfg.prompts);
    }

    [[nodiscard]] const std::string& model_id() const override { return m_model_id; }
    [[nodiscard]] const prompts::Templates& templates() const noexcept { return m_templates; }

    [[nodiscard]] std::string complete(const std::string& prompt) const
    {
        auto res = m_transport.post({{"model", m_model_id}, {"prompt", prompt}});
        auto it = res.find("output");
        if (it == res.end() || !it->is_string()) {
            throw UnparseableResponse(res.dump());
        }
        return it->get<std::string>();
    }

    [[nodiscard]] std::string interpret(std::string_view campaign_text) const override
    {
        auto out = complete(prompts::render(m_templates.interpret, {{"campaign", std::string(campaign_text)}}));
        auto summary = text::normalize_whitespace(out);
        if (summary.empty()) {
            throw EmptyResponse("empty interpretation from " + m_model_id);
        }
        return summary;
    }

    [[nodiscard]] Grade classify(std::string_view summary, std::string_view pt_text) const override
    {
        return parse_grade(complete(prompts::render(
            m_templates.classify, {{"summary", std::string(summary)}, {"pt", std::string(pt_text)}})));
    }

    [[nodiscard]] std::vector<Grade> classify_batch(std::string_view summary,
                                                    std::span<const std::string> pt_texts) const override
    {
        if (m_batch_size == 1) {
            return LanguageModel::classify_batch(summary, pt_texts);
        }
        std::vector<Grade> grades;
        for (std::size_t i = 0; i < pt_texts.size(); i += m_batch_size) {
            auto batch = pt_texts.subspan(i, std::min(m_batch_size, pt_texts.size() - i));
            auto raw = complete(prompts::render(
                m_templates.classify_batch,
                {{"summary", std::string(summary)}, {"pts", prompts::numbered_list(batch)}}));
            auto parsed = parse_grade_lines(raw, batch.size());
            grades.insert(grades.end(), parsed.begin(), parsed.end());
        }
        return grades;
    }

    [[nodiscard]] Grade judge(std::string_view campaign_text, std::string_view pt_text) const override
    {
        return parse_grade(complete(prompts::render(
            m_templates.judge, {{"campaign", std::string(campaign_text)}, {"pt", std::string(pt_text)}})));
    }

    [[nodiscard]] double judge_set_score(std::string_view campaign_text,
                                         std::span<const std::string> pt_texts) const override
    {
        if (pt_texts.empty()) {
            throw UnparseableResponse("set score requested for an empty PT list");
        }
        return parse_unit_score(complete(prompts::render(
            m_templates.judge_set,
            {{"campaign", std::string(campaign_text)}, {"pts", prompts::numbered_list(pt_texts)}})));
    }

    [[nodiscard]] std::string select_pts(std::string_view campaign_text,
                                         std::span<const PtChoice> chunk) const override
    {
        return complete(prompts::render(
            m_templates.select,
            {{"campaign", std::string(campaign_text)}, {"pts", prompts::choice_list(chunk)}}));
    }

  private:
    Transport m_transport;
    std::string m_model_id;
    std::size_t m_batch_size;
    prompts::Templates m_templates;
};

}  // namespace ptmap::http

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ptmap/jsonl.hpp"
#include "ptmap/retrieval.hpp"

namespace ptmap {

inline constexpr std::string_view kDenseFormat = "ptmap-dense-index";
inline constexpr std::string_view kBm25Format = "ptmap-bm25-index";
inline constexpr int kIndexVersion = 1;

/// Dense index sidecar: a header line recording format, version, embedder
/// model id, dimension and count, followed by one `{"pt_id","vector"}` line per
/// node in taxonomy order.
inline std::string serialize_dense_index(const DenseIndex& index)
{
    std::string out = jsonl::dump_line({{"format", kDenseFormat},
                                        {"version", kIndexVersion},
                                        {"model_id", index.model_id()},
                                        {"dimension", index.dimension()},
                                        {"count", index.size()}});
    out += '\n';
    for (const auto& e : index.entries()) {
        out += jsonl::dump_line({{"pt_id", e.pt_id}, {"vector", e.vector.values}});
        out += '\n';
    }
    return out;
}

/// Parses a dense index and rejects it when it was built by a different
/// embedder model or dimension than the one currently configured.
inline DenseIndex parse_dense_index(std::istream& in, std::string_view expected_model_id,
                                    std::size_t expected_dimension)
try {
    std::optional<jsonl::json> header;
    std::vector<DenseEntry> entries;
    std::size_t dimension = 0;
    jsonl::for_each_record(in, [&](const jsonl::json& obj, std::size_t line) {
        if (!header) {
            if (obj.value("format", "") != kDenseFormat) {
                throw MalformedRecord(line, "not a dense index header");
            }
            if (obj.value("version", 0) != kIndexVersion) {
                throw IndexMismatch("unsupported dense index version " + obj.value("version", jsonl::json()).dump());
            }
            auto model = jsonl::require_string(obj, "model_id", line);
            if (model != expected_model_id) {
                throw IndexMismatch("dense index built with embedder '" + model + "', configured embedder is '"
                                    + std::string(expected_model_id) + "'");
            }
            dimension = static_cast<std::size_t>(jsonl::require_int(obj, "dimension", line));
            if (dimension != expected_dimension) {
                throw IndexMismatch("dense index dimension " + std::to_string(dimension)
                                    + " differs from configured " + std::to_string(expected_dimension));
            }
            header = obj;
            return;
        }
        DenseEntry e;
        e.pt_id = jsonl::require_string(obj, "pt_id", line);
        auto it = obj.find("vector");
        if (it == obj.end() || !it->is_array()) {
            throw MalformedRecord(line, "missing vector");
        }
        for (const auto& x : *it) {
            if (!x.is_number()) {
                throw MalformedRecord(line, "non-numeric vector component");
            }
            e.vector.values.push_back(x.get<double>());
        }
        if (e.vector.dimension() != dimension) {
            throw MalformedRecord(line, "vector dimension " + std::to_string(e.vector.dimension()));
        }
        entries.push_back(std::move(e));
    });
    if (!header) {
        throw IndexMismatch("dense index is empty");
    }
    if (entries.size() != header->at("count").get<std::size_t>()) {
        throw IndexMismatch("dense index truncated");
    }
    return DenseIndex(std::string(expected_model_id), dimension, std::move(entries));
} catch (const jsonl::json::exception& e) {
    throw IndexMismatch(std::string("malformed dense index: ") + e.what());
}

inline DenseIndex load_dense_index(const std::filesystem::path& path, std::string_view expected_model_id,
                                   std::size_t expected_dimension)
{
    auto in = jsonl::open_input(path);
    return parse_dense_index(in, expected_model_id, expected_dimension);
}

inline std::string serialize_bm25_index(const Bm25Index& index)
{
    jsonl::json docs = jsonl::json::array();
    for (std::size_t d = 0; d < index.doc_count(); ++d) {
        docs.push_back({{"pt_id", index.pt_ids()[d]}, {"length", index.doc_lengths()[d]}});
    }
    jsonl::json postings = jsonl::json::object();
    for (const auto& [term, plist] : index.postings()) {
        auto& arr = postings[term] = jsonl::json::array();
        for (const auto& p : plist) {
            arr.push_back({p.doc, p.tf});
        }
    }
    jsonl::json obj = {{"format", kBm25Format},
                       {"version", kIndexVersion},
                       {"k1", index.params().k1},
                       {"b", index.params().b},
                       {"doc_count", index.doc_count()},
                       {"avg_doc_length", index.avg_doc_length()},
                       {"docs", docs},
                       {"postings", postings}};
    return obj.dump(1) + "\n";
}

/// Rejects an index whose k1/b differ from the configured parameters.
inline Bm25Index parse_bm25_index(std::string_view content, const Bm25Params& expected)
{
    jsonl::json obj;
    try {
        obj = jsonl::json::parse(content);
        if (obj.value("format", "") != kBm25Format || obj.value("version", 0) != kIndexVersion) {
            throw IndexMismatch("not a version " + std::to_string(kIndexVersion) + " BM25 index");
        }
        Bm25Params params{obj.at("k1").get<double>(), obj.at("b").get<double>()};
        if (params.k1 != expected.k1 || params.b != expected.b) {
            throw IndexMismatch("BM25 index parameters differ from configuration");
        }
        std::vector<std::string> ids;
        std::vector<std::size_t> lengths;
        for (const auto& d : obj.at("docs")) {
            ids.push_back(d.at("pt_id").get<std::string>());
            lengths.push_back(d.at("length").get<std::size_t>());
        }
        std::map<std::string, std::vector<Posting>> postings;
        for (const auto& [term, plist] : obj.at("postings").items()) {
            auto& out = postings[term];
            for (const auto& p : plist) {
                auto doc = p.at(0).get<std::size_t>();
                if (doc >= ids.size()) {
                    throw IndexMismatch("posting references unknown document");
                }
                out.push_back(Posting{doc, p.at(1).get<std::size_t>()});
            }
        }
        return Bm25Index(params, std::move(ids), std::move(lengths), std::move(postings));
    } catch (const jsonl::json::exception& e) {
        throw IndexMismatch(std::string("malformed BM25 index: ") + e.what());
    }
}

inline Bm25Index load_bm25_index(const std::filesystem::path& path, const Bm25Params& expected)
{
    auto in = jsonl::open_input(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_bm25_index(ss.str(), expected);
}

}  // namespace ptmap

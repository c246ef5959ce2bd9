#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ptmap/error.hpp"

namespace ptmap::jsonl {

using json = nlohmann::json;

/// Calls `fn(object, line_number)` for each non-blank line. Line numbers are
/// 1-based. Lines that are not JSON objects raise MalformedRecord.
inline void for_each_record(std::istream& in, const std::function<void(const json&, std::size_t)>& fn)
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw MalformedRecord(line_no, "expected a JSON object");
        }
        fn(obj, line_no);
    }
}

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

inline void for_each_record(const std::filesystem::path& path,
                            const std::function<void(const json&, std::size_t)>& fn)
{
    auto in = open_input(path);
    for_each_record(in, fn);
}

inline std::string require_string(const json& obj, std::string_view field, std::size_t line)
{
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw MalformedRecord(line, "missing or non-string field '" + std::string(field) + "'");
    }
    return it->get<std::string>();
}

inline std::int64_t require_int(const json& obj, std::string_view field, std::size_t line)
{
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_number_integer()) {
        throw MalformedRecord(line, "missing or non-integer field '" + std::string(field) + "'");
    }
    return it->get<std::int64_t>();
}

inline std::vector<std::string> require_string_array(const json& obj, std::string_view field,
                                                     std::size_t line)
{
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_array()) {
        throw MalformedRecord(line, "missing or non-array field '" + std::string(field) + "'");
    }
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) {
            throw MalformedRecord(line, "field '" + std::string(field) + "' must hold strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

/// Compact single-line serialization used for every JSONL artifact.
inline std::string dump_line(const json& obj)
{
    return obj.dump(-1, ' ', false, json::error_handler_t::strict);
}

/// Writes `content` next to `path` and renames it into place.
inline void write_atomic(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw IoError("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
    }
}

inline void write_records(const std::filesystem::path& path, const std::vector<json>& records)
{
    std::string content;
    for (const auto& r : records) {
        content += dump_line(r);
        content += '\n';
    }
    write_atomic(path, content);
}

}  // namespace ptmap::jsonl

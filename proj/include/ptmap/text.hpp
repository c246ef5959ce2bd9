#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ptmap::text {

inline bool is_space(char c) noexcept
{
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline bool is_alnum(char c) noexcept
{
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

/// Trims both ends and collapses every internal whitespace run to one space.
inline std::string normalize_whitespace(std::string_view in)
{
    std::string out;
    out.reserve(in.size());
    bool pending_space = false;
    for (char c : in) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

inline std::string to_lower(std::string_view in)
{
    std::string out(in);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

/// Lowercases and splits on every non-alphanumeric byte, dropping empty
/// tokens. This is the single tokenizer shared by BM25, the mock embedder and
/// the mock relevance rules.
inline std::vector<std::string> tokenize(std::string_view in)
{
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : in) {
        if (is_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

inline std::set<std::string> token_set(std::string_view in)
{
    auto tokens = tokenize(in);
    return {std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end())};
}

/// Splits on `sep` and trims each piece.
inline std::vector<std::string> split_trim(std::string_view in, std::string_view sep)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = in.find(sep, start);
        auto piece = in.substr(start, pos == std::string_view::npos ? pos : pos - start);
        parts.push_back(normalize_whitespace(piece));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + sep.size();
    }
    return parts;
}

template <typename Range>
std::string join(const Range& parts, std::string_view sep)
{
    std::string out;
    bool first = true;
    for (const auto& p : parts) {
        if (!first) {
            out.append(sep);
        }
        out.append(p);
        first = false;
    }
    return out;
}

/// Replaces every `{name}` placeholder with its value in one left-to-right
/// pass; substituted text is never rescanned. Unknown placeholders are left in
/// place.
template <typename Map>
std::string substitute(std::string_view tmpl, const Map& values)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            break;
        }
        auto close = tmpl.find('}', open + 1);
        if (close == std::string_view::npos) {
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const auto name = tmpl.substr(open + 1, close - open - 1);
        bool replaced = false;
        for (const auto& [key, value] : values) {
            if (std::string_view(key) == name) {
                out.append(value);
                replaced = true;
                break;
            }
        }
        if (replaced) {
            pos = close + 1;
        } else {
            out.push_back('{');
            pos = open + 1;
        }
    }
    out.append(tmpl.substr(pos));
    return out;
}

}  // namespace ptmap::text

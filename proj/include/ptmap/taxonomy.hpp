#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ptmap/error.hpp"
#include "ptmap/jsonl.hpp"
#include "ptmap/text.hpp"

namespace ptmap {

/// One leaf of the product-type taxonomy. Fields are stored normalized
/// (trimmed, internal whitespace collapsed) and never contain `|`.
struct PtNode {
    std::string id;
    std::string category;
    std::string family;
    std::string type_name;
    std::optional<std::string> description;

    friend bool operator==(const PtNode&, const PtNode&) = default;
};

inline constexpr std::string_view kFieldSeparator = " | ";

/// Canonical text used for embedding, BM25 indexing and prompts:
/// `category | family | type_name`, followed by ` | description` when present.
inline std::string render_node(const PtNode& node)
{
    std::string out = text::normalize_whitespace(node.category);
    out += kFieldSeparator;
    out += text::normalize_whitespace(node.family);
    out += kFieldSeparator;
    out += text::normalize_whitespace(node.type_name);
    if (node.description && !node.description->empty()) {
        out += kFieldSeparator;
        out += text::normalize_whitespace(*node.description);
    }
    return out;
}

/// The pieces of a rendered node. Inverse of render_node (without the id).
struct RenderedFields {
    std::string category;
    std::string family;
    std::string type_name;
    std::optional<std::string> description;
};

/// Splits rendered PT text back into its levels. Text with fewer than three
/// pipe-separated fields is treated as a bare type name.
inline RenderedFields parse_rendered(std::string_view rendered)
{
    auto parts = text::split_trim(rendered, "|");
    RenderedFields f;
    if (parts.size() < 3) {
        f.type_name = text::normalize_whitespace(rendered);
        return f;
    }
    f.category = parts[0];
    f.family = parts[1];
    f.type_name = parts[2];
    if (parts.size() > 3) {
        std::vector<std::string> rest(parts.begin() + 3, parts.end());
        f.description = text::join(rest, " ");
    }
    return f;
}

class Taxonomy {
  public:
    Taxonomy() = default;

    /// Validates and takes ownership of `nodes`. Throws EmptyTaxonomy,
    /// DuplicateId or MalformedRecord (line = 1-based position).
    explicit Taxonomy(std::vector<PtNode> nodes)
    {
        if (nodes.empty()) {
            throw EmptyTaxonomy();
        }
        m_nodes.reserve(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            add(std::move(nodes[i]), i + 1);
        }
    }

    [[nodiscard]] const std::vector<PtNode>& nodes() const noexcept { return m_nodes; }
    [[nodiscard]] std::size_t size() const noexcept { return m_nodes.size(); }
    [[nodiscard]] auto begin() const noexcept { return m_nodes.begin(); }
    [[nodiscard]] auto end() const noexcept { return m_nodes.end(); }

    [[nodiscard]] const PtNode* find(std::string_view id) const
    {
        auto it = m_by_id.find(std::string(id));
        return it == m_by_id.end() ? nullptr : &m_nodes[it->second];
    }

    [[nodiscard]] bool contains(std::string_view id) const { return find(id) != nullptr; }

    [[nodiscard]] const PtNode& at(std::string_view id) const
    {
        const auto* node = find(id);
        if (node == nullptr) {
            throw UnknownPt(std::string(id));
        }
        return *node;
    }

    [[nodiscard]] std::string render(std::string_view id) const { return render_node(at(id)); }

  private:
    static std::string clean_field(const std::string& raw, std::string_view name, std::size_t line)
    {
        auto value = text::normalize_whitespace(raw);
        if (value.empty()) {
            throw MalformedRecord(line, "field '" + std::string(name) + "' is empty");
        }
        if (value.find('|') != std::string::npos) {
            throw MalformedRecord(line, "field '" + std::string(name) + "' contains '|'");
        }
        return value;
    }

    void add(PtNode node, std::size_t line)
    {
        node.id = text::normalize_whitespace(node.id);
        if (node.id.empty()) {
            throw MalformedRecord(line, "field 'id' is empty");
        }
        node.category = clean_field(node.category, "category", line);
        node.family = clean_field(node.family, "family", line);
        node.type_name = clean_field(node.type_name, "type", line);
        if (node.description) {
            auto d = text::normalize_whitespace(*node.description);
            if (d.empty()) {
                node.description.reset();
            } else {
                node.description = clean_field(d, "description", line);
            }
        }
        if (m_by_id.contains(node.id)) {
            throw DuplicateId(node.id);
        }
        m_by_id.emplace(node.id, m_nodes.size());
        m_nodes.push_back(std::move(node));
    }

    std::vector<PtNode> m_nodes;
    std::unordered_map<std::string, std::size_t> m_by_id;
};

/// Parses taxonomy JSONL: `{"id","category","family","type"}` plus an optional
/// `description`. Unknown fields are ignored.
inline Taxonomy parse_taxonomy(std::istream& in)
{
    std::vector<PtNode> nodes;
    std::vector<std::size_t> lines;
    jsonl::for_each_record(in, [&](const jsonl::json& obj, std::size_t line) {
        PtNode node;
        node.id = jsonl::require_string(obj, "id", line);
        node.category = jsonl::require_string(obj, "category", line);
        node.family = jsonl::require_string(obj, "family", line);
        node.type_name = jsonl::require_string(obj, "type", line);
        if (auto it = obj.find("description"); it != obj.end() && it->is_string()) {
            node.description = it->get<std::string>();
        }
        nodes.push_back(std::move(node));
        lines.push_back(line);
    });
    if (nodes.empty()) {
        throw EmptyTaxonomy();
    }
    try {
        return Taxonomy(std::move(nodes));
    } catch (const MalformedRecord& e) {
        // Taxonomy reports positions; map back to file line numbers.
        throw MalformedRecord(lines.at(e.line() - 1),
                              std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
    }
}

inline Taxonomy load_taxonomy(const std::filesystem::path& path)
{
    auto in = jsonl::open_input(path);
    return parse_taxonomy(in);
}

inline jsonl::json to_json(const PtNode& node)
{
    jsonl::json obj = {{"id", node.id},
                       {"category", node.category},
                       {"family", node.family},
                       {"type", node.type_name}};
    if (node.description) {
        obj["description"] = *node.description;
    }
    return obj;
}

}  // namespace ptmap

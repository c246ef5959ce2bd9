#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptmap/jsonl.hpp"

namespace ptmap {

/// Per (system, campaign) metric values. Unset means undefined.
struct MetricRow {
    std::string system_id;
    std::string campaign_id;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> coherence;
    std::optional<double> llm_precision;
    std::optional<double> llm_recall;
    std::optional<double> llm_f1;
    std::optional<double> llm_score;
};

struct MetricField {
    std::string_view name;
    std::optional<double> MetricRow::*member;
};

inline constexpr std::array<MetricField, 8> kMetricFields = {{
    {"precision", &MetricRow::precision},
    {"recall", &MetricRow::recall},
    {"f1", &MetricRow::f1},
    {"coherence", &MetricRow::coherence},
    {"llm_precision", &MetricRow::llm_precision},
    {"llm_recall", &MetricRow::llm_recall},
    {"llm_f1", &MetricRow::llm_f1},
    {"llm_score", &MetricRow::llm_score},
}};

/// Mean and sample (n - 1) standard deviation over the defined values.
struct Stat {
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> std;
};

inline Stat summarize(const std::vector<double>& values)
{
    Stat s;
    s.n = values.size();
    if (values.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    s.mean = mean;
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - mean) * (v - mean);
        }
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

/// "0.8934 ± 0.0825", "0.9000" when n = 1, "--" when undefined.
inline std::string format_stat(const Stat& s)
{
    if (!s.mean) {
        return "--";
    }
    char buf[64];
    if (s.std) {
        std::snprintf(buf, sizeof buf, "%.4f ± %.4f", *s.mean, *s.std);
    } else {
        std::snprintf(buf, sizeof buf, "%.4f", *s.mean);
    }
    return buf;
}

enum class EvalMode { human, judge };

inline std::string_view to_string(EvalMode m) noexcept { return m == EvalMode::human ? "human" : "judge"; }

struct EvalReport {
    EvalMode mode = EvalMode::human;
    std::vector<std::string> systems;  // first-appearance order
    std::vector<MetricRow> rows;
    std::map<std::string, std::map<std::string, Stat>> aggregates;  // system -> metric -> stat
    std::optional<Stat> agreement;  // human vs judge Jaccard, when measured
    std::vector<std::string> notes;

    [[nodiscard]] const Stat& stat(const std::string& system, std::string_view metric) const
    {
        return aggregates.at(system).at(std::string(metric));
    }
};

inline EvalReport aggregate(std::vector<MetricRow> rows, EvalMode mode = EvalMode::human)
{
    EvalReport report;
    report.mode = mode;
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    for (const auto& row : rows) {
        if (std::find(report.systems.begin(), report.systems.end(), row.system_id) == report.systems.end()) {
            report.systems.push_back(row.system_id);
        }
        auto& per_metric = values[row.system_id];
        for (const auto& f : kMetricFields) {
            auto& bucket = per_metric[std::string(f.name)];
            if (const auto& v = row.*(f.member)) {
                bucket.push_back(*v);
            }
        }
    }
    for (const auto& [system, per_metric] : values) {
        for (const auto& [metric, vals] : per_metric) {
            report.aggregates[system][metric] = summarize(vals);
        }
    }
    report.rows = std::move(rows);
    report.notes.push_back("precision is undefined for empty predictions and excluded from aggregates");
    report.notes.push_back("coherence is undefined for fewer than two predicted PTs");
    report.notes.push_back("std is the sample standard deviation, undefined for n < 2");
    return report;
}

namespace detail {

inline jsonl::json optional_json(const std::optional<double>& v)
{
    return v ? jsonl::json(*v) : jsonl::json(nullptr);
}

/// Display width in code points (the table contains "±").
inline std::size_t display_width(std::string_view s)
{
    std::size_t w = 0;
    for (unsigned char c : s) {
        w += (c & 0xC0) != 0x80 ? 1 : 0;
    }
    return w;
}

}  // namespace detail

inline jsonl::json to_json(const Stat& s)
{
    return {{"n", s.n}, {"mean", detail::optional_json(s.mean)}, {"std", detail::optional_json(s.std)},
            {"display", format_stat(s)}};
}

inline jsonl::json to_json(const EvalReport& report)
{
    jsonl::json rows = jsonl::json::array();
    for (const auto& r : report.rows) {
        jsonl::json obj = {{"system_id", r.system_id}, {"campaign_id", r.campaign_id}};
        for (const auto& f : kMetricFields) {
            obj[std::string(f.name)] = detail::optional_json(r.*(f.member));
        }
        rows.push_back(std::move(obj));
    }
    jsonl::json aggregates = jsonl::json::object();
    for (const auto& [system, per_metric] : report.aggregates) {
        for (const auto& [metric, stat] : per_metric) {
            aggregates[system][metric] = to_json(stat);
        }
    }
    jsonl::json obj = {{"mode", to_string(report.mode)},
                       {"systems", report.systems},
                       {"rows", rows},
                       {"aggregates", aggregates},
                       {"notes", report.notes}};
    if (report.agreement) {
        obj["agreement"] = to_json(*report.agreement);
    }
    return obj;
}

/// Columns of the rendered table, in display order, with the metric each
/// column reads in the given mode.
inline std::vector<std::pair<std::string, std::string>> table_columns(EvalMode mode)
{
    if (mode == EvalMode::human) {
        return {{"Precision", "precision"}, {"Recall", "recall"}, {"F1", "f1"}, {"Coherence", "coherence"}};
    }
    return {{"Precision", "llm_precision"},
            {"Recall", "llm_recall"},
            {"F1", "llm_f1"},
            {"Coherence", "coherence"},
            {"LLM Score", "llm_score"}};
}

/// Aligned text table, one row per system in report order.
inline std::string render_table(const EvalReport& report)
{
    const auto columns = table_columns(report.mode);
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header{"Model"};
    for (const auto& [title, metric] : columns) {
        header.push_back(title);
    }
    cells.push_back(header);
    for (const auto& system : report.systems) {
        std::vector<std::string> line{system};
        for (const auto& [title, metric] : columns) {
            const auto& per_metric = report.aggregates.at(system);
            auto it = per_metric.find(metric);
            line.push_back(it == per_metric.end() ? "--" : format_stat(it->second));
        }
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            widths[i] = std::max(widths[i], detail::display_width(line[i]));
        }
    }
    std::string out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            const auto& cell = cells[r][i];
            out += cell;
            if (i + 1 < cells[r].size()) {
                out.append(widths[i] - detail::display_width(cell) + 2, ' ');
            }
        }
        out += '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : widths) {
                total += w + 2;
            }
            out.append(total - 2, '-');
            out += '\n';
        }
    }
    if (report.agreement) {
        out += "Agreement (Jaccard, human vs judge): " + format_stat(*report.agreement) + '\n';
    }
    return out;
}

}  // namespace ptmap

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptmap/error.hpp"
#include "ptmap/inference.hpp"
#include "ptmap/jsonl.hpp"
#include "ptmap/taxonomy.hpp"

namespace ptmap {

struct ExposureEvent {
    std::string user_id;
    std::string campaign_id;
    std::int64_t ts = 0;  // UTC epoch milliseconds
};

struct PurchaseEvent {
    std::string user_id;
    std::string pt_id;
    std::int64_t ts = 0;
};

struct UserCampaignLabel {
    std::string user_id;
    std::string campaign_id;
    int label = 0;
    std::vector<std::string> matched_pt_ids;  // sorted, unique

    friend bool operator==(const UserCampaignLabel&, const UserCampaignLabel&) = default;
};

/// Attribution horizon in milliseconds; nullopt means unbounded.
using AttributionWindow = std::optional<std::int64_t>;

inline constexpr std::int64_t kMillisPerDay = 24LL * 60 * 60 * 1000;
inline constexpr std::int64_t kDefaultWindowMs = 7 * kMillisPerDay;

/// Campaign id -> PT(c).
using CoverageMap = std::map<std::string, std::set<std::string>>;

inline CoverageMap coverage_map(const std::vector<CoverageSet>& sets)
{
    CoverageMap out;
    for (const auto& s : sets) {
        auto ids = s.pt_ids();
        out[s.campaign_id].insert(ids.begin(), ids.end());
    }
    return out;
}

namespace detail {

template <typename Event>
void check_sorted(std::span<const Event> events)
{
    std::unordered_map<std::string_view, std::int64_t> last;
    for (const auto& e : events) {
        if (e.ts < 0) {
            throw Error("InvalidEvent", "negative timestamp for user '" + e.user_id + "'");
        }
        auto [it, inserted] = last.try_emplace(e.user_id, e.ts);
        if (!inserted) {
            if (e.ts < it->second) {
                throw UnsortedEvents(e.user_id);
            }
            it->second = e.ts;
        }
    }
}

inline std::int64_t window_end(std::int64_t start, std::int64_t window)
{
    if (window > std::numeric_limits<std::int64_t>::max() - start) {
        return std::numeric_limits<std::int64_t>::max();
    }
    return start + window;
}

}  // namespace detail

/// y(u, c) = 1 iff some purchase by u of a PT in PT(c) falls in
/// (exposure, exposure + window]. One label per exposed (user, campaign)
/// pair, anchored at the earliest exposure, emitted in (user, campaign) order.
///
/// Events must be sorted by timestamp within each user. Purchases are
/// validated against `taxonomy` when it is given.
inline std::vector<UserCampaignLabel> build_labels(const CoverageMap& coverage, std::span<const ExposureEvent> exposures,
                                                   std::span<const PurchaseEvent> purchases, AttributionWindow window,
                                                   const Taxonomy* taxonomy = nullptr)
{
    if (window && *window <= 0) {
        throw ConfigError("label.window_ms", "must be positive");
    }
    detail::check_sorted(exposures);
    detail::check_sorted(purchases);

    std::unordered_map<std::string_view, std::vector<const PurchaseEvent*>> by_user;
    for (const auto& p : purchases) {
        if (taxonomy != nullptr && !taxonomy->contains(p.pt_id)) {
            throw UnknownPt(p.pt_id);
        }
        by_user[p.user_id].push_back(&p);
    }

    std::map<std::pair<std::string, std::string>, std::int64_t> first_exposure;
    for (const auto& e : exposures) {
        if (!coverage.contains(e.campaign_id)) {
            throw UnknownCampaign(e.campaign_id);
        }
        first_exposure.try_emplace({e.user_id, e.campaign_id}, e.ts);  // sorted, so first is earliest
    }

    std::vector<UserCampaignLabel> labels;
    labels.reserve(first_exposure.size());
    for (const auto& [key, start] : first_exposure) {
        const auto& [user, campaign] = key;
        const auto& pts = coverage.at(campaign);
        UserCampaignLabel label{user, campaign, 0, {}};
        if (auto it = by_user.find(user); it != by_user.end()) {
            const auto& events = it->second;
            auto lo = std::upper_bound(events.begin(), events.end(), start,
                                       [](std::int64_t t, const PurchaseEvent* p) { return t < p->ts; });
            auto hi = events.end();
            if (window) {
                const auto end = detail::window_end(start, *window);
                hi = std::upper_bound(lo, events.end(), end,
                                      [](std::int64_t t, const PurchaseEvent* p) { return t < p->ts; });
            }
            std::set<std::string> matched;
            for (auto p = lo; p != hi; ++p) {
                if (pts.contains((*p)->pt_id)) {
                    matched.insert((*p)->pt_id);
                }
            }
            label.matched_pt_ids.assign(matched.begin(), matched.end());
            label.label = matched.empty() ? 0 : 1;
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

inline double positive_rate(const std::vector<UserCampaignLabel>& labels)
{
    if (labels.empty()) {
        return 0.0;
    }
    std::size_t pos = 0;
    for (const auto& l : labels) {
        pos += static_cast<std::size_t>(l.label);
    }
    return static_cast<double>(pos) / static_cast<double>(labels.size());
}

// JSONL: exposures {"user_id","campaign_id","ts"}, purchases
// {"user_id","pt_id","ts"}, labels {"user_id","campaign_id","label","matched_pt_ids"}.

inline std::vector<ExposureEvent> load_exposures(const std::filesystem::path& path)
{
    std::vector<ExposureEvent> out;
    jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
        ExposureEvent e{jsonl::require_string(obj, "user_id", line), jsonl::require_string(obj, "campaign_id", line),
                        jsonl::require_int(obj, "ts", line)};
        if (e.ts < 0) {
            throw MalformedRecord(line, "negative timestamp");
        }
        out.push_back(std::move(e));
    });
    return out;
}

inline std::vector<PurchaseEvent> load_purchases(const std::filesystem::path& path)
{
    std::vector<PurchaseEvent> out;
    jsonl::for_each_record(path, [&](const jsonl::json& obj, std::size_t line) {
        PurchaseEvent e{jsonl::require_string(obj, "user_id", line), jsonl::require_string(obj, "pt_id", line),
                        jsonl::require_int(obj, "ts", line)};
        if (e.ts < 0) {
            throw MalformedRecord(line, "negative timestamp");
        }
        out.push_back(std::move(e));
    });
    return out;
}

inline jsonl::json to_json(const ExposureEvent& e)
{
    return {{"user_id", e.user_id}, {"campaign_id", e.campaign_id}, {"ts", e.ts}};
}

inline jsonl::json to_json(const PurchaseEvent& e)
{
    return {{"user_id", e.user_id}, {"pt_id", e.pt_id}, {"ts", e.ts}};
}

inline jsonl::json to_json(const UserCampaignLabel& l)
{
    return {{"user_id", l.user_id}, {"campaign_id", l.campaign_id}, {"label", l.label},
            {"matched_pt_ids", l.matched_pt_ids}};
}

/// Accepts "inf", a plain millisecond count, or a count with an
/// ms/s/m/h/d suffix.
inline AttributionWindow parse_window(std::string_view raw)
{
    auto s = text::to_lower(text::normalize_whitespace(raw));
    if (s == "inf" || s == "infinite" || s == "none") {
        return std::nullopt;
    }
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) {
        ++digits;
    }
    if (digits == 0) {
        throw ConfigError("window", "expected 'inf' or a positive duration, got '" + std::string(raw) + "'");
    }
    std::int64_t value = 0;
    try {
        value = std::stoll(s.substr(0, digits));
    } catch (const std::exception&) {
        throw ConfigError("window", "duration out of range: '" + std::string(raw) + "'");
    }
    auto unit = s.substr(digits);
    std::int64_t scale = 1;
    if (unit.empty() || unit == "ms") {
        scale = 1;
    } else if (unit == "s") {
        scale = 1000;
    } else if (unit == "m") {
        scale = 60 * 1000;
    } else if (unit == "h") {
        scale = 60 * 60 * 1000;
    } else if (unit == "d") {
        scale = kMillisPerDay;
    } else {
        throw ConfigError("window", "unknown unit '" + unit + "'");
    }
    if (value <= 0 || value > std::numeric_limits<std::int64_t>::max() / scale) {
        throw ConfigError("window", "must be positive and finite: '" + std::string(raw) + "'");
    }
    return value * scale;
}

}  // namespace ptmap

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ptmap/inference.hpp"
#include "ptmap/jsonl.hpp"
#include "ptmap/labeling.hpp"
#include "ptmap/mock_providers.hpp"
#include "ptmap/taxonomy.hpp"

namespace ptmap::fixtures {

inline constexpr int kFixtureVersion = 1;

struct FamilySpec {
    std::string_view category;
    std::string_view family;
    std::string_view theme;  // lexicon key that evokes this family
    std::array<std::string_view, 5> types;
};

// clang-format off
inline constexpr std::array<FamilySpec, 44> kFamilies = {{
    {"Food", "Fresh Produce", "harvest", {"Apples", "Bananas", "Berries", "Salad Greens", "Tomatoes"}},
    {"Food", "Bakery", "oven", {"Sandwich Bread", "Bagels", "Muffins", "Cakes", "Tortillas"}},
    {"Food", "Snacks", "munchies", {"Snack Boxes", "Potato Chips", "Pretzels", "Granola Bars", "Popcorn"}},
    {"Food", "Pantry Staples", "stockpile", {"Emergency Food", "Rice", "Pasta", "Canned Soup", "Cooking Oil"}},
    {"Beverages", "Coffee & Tea", "mornings", {"Ground Coffee", "Coffee Pods", "Tea Bags", "Cold Brew", "Espresso Beans"}},
    {"Beverages", "Juices", "squeeze", {"Orange Juice", "Apple Juice", "Smoothies", "Vegetable Juice", "Lemonade"}},
    {"Beverages", "Water", "hydration", {"Bottled Water", "Sparkling Water", "Flavored Water", "Water Filters", "Electrolyte Drinks"}},
    {"Beverages", "Soft Drinks", "fizz", {"Cola", "Root Beer", "Energy Drinks", "Ginger Ale", "Iced Tea"}},
    {"Electronics", "Audio Equipment", "festival", {"Wireless Headphones", "Portable Speakers", "Earbuds", "Soundbars", "Turntables"}},
    {"Electronics", "Computers", "productivity", {"Laptops", "Desktop Computers", "Monitors", "Keyboards", "Computer Mice"}},
    {"Electronics", "Mobile Phones", "connected", {"Smartphones", "Phone Cases", "Screen Protectors", "Phone Chargers", "Power Banks"}},
    {"Electronics", "Television & Video", "bingewatch", {"Smart TVs", "Streaming Devices", "Projectors", "TV Mounts", "Blu-ray Players"}},
    {"Home", "Kitchen Essentials", "chef", {"Cookware Sets", "Knife Sets", "Cutting Boards", "Mixing Bowls", "Food Storage Containers"}},
    {"Home", "Bedding", "slumber", {"Bed Sheets", "Pillows", "Comforters", "Mattress Toppers", "Weighted Blankets"}},
    {"Home", "Cleaning Supplies", "sparkle", {"Laundry Detergent", "Dish Soap", "Paper Towels", "Disinfecting Wipes", "Mops"}},
    {"Home", "Home Decor", "makeover", {"Wall Art", "Candles", "Throw Pillows", "Picture Frames", "Area Rugs"}},
    {"Outdoor & Garden", "Patio Furniture", "lounging", {"Patio Chairs", "Patio Umbrellas", "Outdoor Dining Sets", "Hammocks", "Fire Pits"}},
    {"Outdoor & Garden", "Gardening", "bloom", {"Garden Hoses", "Potting Soil", "Flower Seeds", "Pruning Shears", "Planters"}},
    {"Outdoor & Garden", "Grills", "cookout", {"Gas Grills", "Charcoal Grills", "Grill Covers", "Grilling Tools", "Smokers"}},
    {"Outdoor & Garden", "Camping Gear", "wilderness", {"Tents", "Sleeping Bags", "Camping Chairs", "Coolers", "Lanterns"}},
    {"Automotive", "Car Care", "showroom", {"Car Wax", "Car Wash Soap", "Microfiber Towels", "Tire Shine", "Windshield Wipers"}},
    {"Automotive", "Motor Oil & Fluids", "tuneup", {"Motor Oil", "Antifreeze", "Brake Fluid", "Transmission Fluid", "Fuel Additives"}},
    {"Automotive", "Car Electronics", "roadtrip", {"Dash Cams", "Car Chargers", "GPS Navigators", "Car Stereos", "Jump Starters"}},
    {"Automotive", "Tires & Wheels", "traction", {"All Season Tires", "Winter Tires", "Tire Inflators", "Wheel Covers", "Lug Wrenches"}},
    {"Office & Stationery", "Money Handling", "register", {"Cash Registers", "Money Deposit Bags", "Coin Counters", "Cash Boxes", "Money Counters"}},
    {"Office & Stationery", "Writing Supplies", "scribble", {"Ballpoint Pens", "Pencils", "Markers", "Highlighters", "Erasers"}},
    {"Office & Stationery", "Paper Products", "paperwork", {"Notebooks", "Printer Paper", "Sticky Notes", "Index Cards", "Envelopes"}},
    {"Office & Stationery", "School Supplies", "classroom", {"Backpacks", "Lunch Boxes", "Binders", "Pencil Cases", "Calculators"}},
    {"Health & Beauty", "Skin Care", "glow", {"Moisturizers", "Sunscreen", "Face Wash", "Lip Balm", "Serums"}},
    {"Health & Beauty", "Vitamins", "wellness", {"Multivitamins", "Vitamin C", "Fish Oil", "Protein Powder", "Probiotics"}},
    {"Health & Beauty", "Hair Care", "salon", {"Shampoo", "Conditioner", "Hair Dryers", "Hair Brushes", "Styling Gel"}},
    {"Health & Beauty", "Oral Care", "smile", {"Toothpaste", "Toothbrushes", "Mouthwash", "Dental Floss", "Whitening Strips"}},
    {"Baby & Kids", "Diapering", "newborn", {"Diapers", "Baby Wipes", "Diaper Bags", "Changing Pads", "Diaper Cream"}},
    {"Baby & Kids", "Toys", "playtime", {"Building Blocks", "Dolls", "Board Games", "Puzzles", "Action Figures"}},
    {"Baby & Kids", "Baby Feeding", "mealtime", {"Baby Bottles", "Baby Formula", "High Chairs", "Sippy Cups", "Bibs"}},
    {"Baby & Kids", "Kids Clothing", "wardrobe", {"Kids Shoes", "Pajamas", "Rain Jackets", "School Uniforms", "Socks"}},
    {"Sports & Fitness", "Exercise Equipment", "workout", {"Dumbbells", "Yoga Mats", "Treadmills", "Resistance Bands", "Exercise Bikes"}},
    {"Sports & Fitness", "Team Sports", "gameday", {"Basketballs", "Soccer Balls", "Baseball Gloves", "Footballs", "Hockey Sticks"}},
    {"Sports & Fitness", "Cycling", "pedal", {"Bikes", "Bike Helmets", "Bike Locks", "Bike Lights", "Bike Pumps"}},
    {"Sports & Fitness", "Water Sports", "poolside", {"Swimsuits", "Goggles", "Life Jackets", "Paddle Boards", "Pool Floats"}},
    {"Pets", "Dog Supplies", "pup", {"Dog Food", "Dog Leashes", "Dog Beds", "Dog Treats", "Dog Toys"}},
    {"Pets", "Cat Supplies", "kitty", {"Cat Food", "Cat Litter", "Scratching Posts", "Cat Treats", "Cat Toys"}},
    {"Pets", "Fish & Aquatics", "reef", {"Aquariums", "Fish Food", "Aquarium Filters", "Aquarium Heaters", "Water Conditioners"}},
    {"Pets", "Small Animals", "critters", {"Hamster Cages", "Bird Seed", "Rabbit Food", "Pet Bedding", "Small Animal Hay"}},
}};
// clang-format on

inline constexpr std::array<std::string_view, 6> kHooks = {
    "Weekend savings on", "Stock up on", "New arrivals in", "Everyday low prices on", "Top picks in", "Shop the best of"};

inline constexpr std::array<std::string_view, 6> kClosers = {
    "money back guarantee on every order", "restocked every morning in our stores", "free delivery available",
    "easy returns available", "save money every day", "ready when guests arrive"};

/// The fresh-produce campaign used throughout the examples.
inline constexpr std::string_view kFreshProduceTitle = "Farm-fresh picks or your money returned";
inline constexpr std::string_view kFreshProduceContent = "Fresh produce, restocked every morning in our stores.";

struct FixtureOptions {
    std::uint64_t seed = 7;
    std::size_t campaigns = 24;
    std::size_t users = 60;
    std::size_t exposures_per_user = 4;
    std::size_t purchases_per_user = 6;
};

struct Fixture {
    std::vector<PtNode> taxonomy;
    std::vector<Campaign> campaigns;
    std::vector<std::pair<std::string, std::vector<std::string>>> lexicon;
    std::vector<std::pair<std::string, std::vector<std::string>>> truth;  // campaign -> pt ids
    std::vector<ExposureEvent> exposures;
    std::vector<PurchaseEvent> purchases;
};

namespace detail {

inline std::string pt_id(std::size_t family, std::size_t type)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "pt%03zu", family * 5 + type + 1);
    return buf;
}

/// Portable index draw; mt19937_64 output is fixed by the standard while the
/// distribution classes are not.
inline std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace detail

/// Seeded synthetic corpus: a 220-PT taxonomy, campaigns that each promote one
/// family (the first is the fresh-produce campaign), a lexicon mapping each
/// family's theme word to its type names, truth sets, and time-ordered
/// exposure and purchase events.
inline Fixture generate(const FixtureOptions& opts)
{
    std::mt19937_64 rng(opts.seed);
    Fixture fx;

    for (std::size_t f = 0; f < kFamilies.size(); ++f) {
        const auto& spec = kFamilies[f];
        for (std::size_t t = 0; t < spec.types.size(); ++t) {
            fx.taxonomy.push_back(PtNode{detail::pt_id(f, t), std::string(spec.category), std::string(spec.family),
                                         std::string(spec.types[t]), std::nullopt});
        }
        std::vector<std::string> expansions;
        for (auto t : spec.types) {
            expansions.emplace_back(t);
        }
        fx.lexicon.emplace_back(std::string(spec.theme), expansions);
    }
    {
        std::vector<std::string> produce{"fruit", "vegetables", "groceries"};
        for (auto t : kFamilies[0].types) {
            produce.emplace_back(t);
        }
        fx.lexicon.emplace_back("produce", produce);
    }

    // Family order for campaigns 2..n is a seeded permutation of the rest.
    std::vector<std::size_t> order(kFamilies.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i + 1;
    }
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[detail::draw(rng, i)]);
    }

    std::vector<std::size_t> campaign_family;
    for (std::size_t c = 0; c < opts.campaigns; ++c) {
        char id[16];
        std::snprintf(id, sizeof id, "c%03zu", c + 1);
        std::size_t family = 0;
        Campaign campaign{id, "", ""};
        if (c == 0) {
            campaign.title = kFreshProduceTitle;
            campaign.content = kFreshProduceContent;
        } else {
            family = order[(c - 1) % order.size()];
            const auto& spec = kFamilies[family];
            campaign.title = std::string(kHooks[detail::draw(rng, kHooks.size())]) + " " + std::string(spec.family);
            std::string theme(spec.theme);
            theme[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(theme[0])));
            campaign.content = theme + " season for " + std::string(spec.category) + " fans, "
                + std::string(kClosers[detail::draw(rng, kClosers.size())]) + ".";
        }
        campaign_family.push_back(family);
        std::vector<std::string> truth;
        for (std::size_t t = 0; t < 5; ++t) {
            truth.push_back(detail::pt_id(family, t));
        }
        fx.truth.emplace_back(campaign.id, truth);
        fx.campaigns.push_back(std::move(campaign));
    }

    // Events: per user, exposures and purchases on a shared clock. Half of
    // the purchases target a PT of a campaign the user saw.
    constexpr std::int64_t kStart = 1'700'000'000'000;
    struct Timed {
        std::int64_t ts;
        bool exposure;
        std::string user;
        std::string ref;
    };
    std::vector<Timed> events;
    for (std::size_t u = 0; u < opts.users; ++u) {
        char user[16];
        std::snprintf(user, sizeof user, "u%04zu", u + 1);
        std::vector<std::size_t> seen;
        std::int64_t clock = kStart + static_cast<std::int64_t>(detail::draw(rng, 3 * kMillisPerDay));
        for (std::size_t e = 0; e < opts.exposures_per_user; ++e) {
            auto c = detail::draw(rng, fx.campaigns.size());
            seen.push_back(c);
            clock += static_cast<std::int64_t>(detail::draw(rng, 2 * kMillisPerDay)) + 1;
            events.push_back(Timed{clock, true, user, fx.campaigns[c].id});
        }
        std::int64_t pclock = kStart;
        for (std::size_t p = 0; p < opts.purchases_per_user; ++p) {
            pclock += static_cast<std::int64_t>(detail::draw(rng, 4 * kMillisPerDay)) + 1;
            std::string pt;
            if (!seen.empty() && detail::draw(rng, 2) == 0) {
                auto family = campaign_family[seen[detail::draw(rng, seen.size())]];
                pt = detail::pt_id(family, detail::draw(rng, 5));
            } else {
                pt = fx.taxonomy[detail::draw(rng, fx.taxonomy.size())].id;
            }
            events.push_back(Timed{pclock, false, user, pt});
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const Timed& a, const Timed& b) {
        if (a.ts != b.ts) {
            return a.ts < b.ts;
        }
        return a.user < b.user;
    });
    for (auto& e : events) {
        if (e.exposure) {
            fx.exposures.push_back(ExposureEvent{e.user, e.ref, e.ts});
        } else {
            fx.purchases.push_back(PurchaseEvent{e.user, e.ref, e.ts});
        }
    }
    return fx;
}

/// Mock-provider run configuration matching the generated files.
inline jsonl::json default_config(std::uint64_t seed)
{
    using json = jsonl::json;
    auto mock = [&](std::string model) { return json{{"kind", "mock"}, {"model_id", std::move(model)}}; };
    json embedder = mock("mock-lexical-256");
    embedder["dimension"] = 256;
    json interpreter = mock("mock-rules-interpreter");
    interpreter["lexicon"] = "lexicon.jsonl";
    return json{{"taxonomy", "taxonomy.jsonl"},
                {"output_dir", "out"},
                {"seed", seed},
                {"tau", 0.3},
                {"parallelism", 1},
                {"bm25", {{"k1", 1.2}, {"b", 0.75}, {"top_k", 100}}},
                {"rerank", {{"enabled", true}, {"cutoff", nullptr}}},
                {"zero_shot", {{"chunk_size", 200}}},
                {"label", {{"window", "7d"}}},
                {"providers",
                 {{"embedder", embedder},
                  {"interpreter", interpreter},
                  {"classifier", mock("mock-rules-classifier")},
                  {"judge", mock("mock-rules-judge")},
                  {"reranker", mock("mock-overlap-reranker")}}}};
}

/// Writes taxonomy, campaigns, lexicon, truth, exposures, purchases, a
/// ready-to-run config.json and a manifest into `dir`.
inline void write(const Fixture& fx, const FixtureOptions& opts, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::vector<jsonl::json> rows;

    for (const auto& n : fx.taxonomy) {
        rows.push_back(to_json(n));
    }
    jsonl::write_records(dir / "taxonomy.jsonl", rows);

    rows.clear();
    for (const auto& c : fx.campaigns) {
        rows.push_back(to_json(c));
    }
    jsonl::write_records(dir / "campaigns.jsonl", rows);

    rows.clear();
    for (const auto& [token, expansions] : fx.lexicon) {
        rows.push_back({{"token", token}, {"expansions", expansions}});
    }
    jsonl::write_records(dir / "lexicon.jsonl", rows);

    rows.clear();
    for (const auto& [campaign, pts] : fx.truth) {
        rows.push_back({{"campaign_id", campaign}, {"pt_ids", pts}});
    }
    jsonl::write_records(dir / "truth.jsonl", rows);

    rows.clear();
    for (const auto& e : fx.exposures) {
        rows.push_back(to_json(e));
    }
    jsonl::write_records(dir / "exposures.jsonl", rows);

    rows.clear();
    for (const auto& p : fx.purchases) {
        rows.push_back(to_json(p));
    }
    jsonl::write_records(dir / "purchases.jsonl", rows);

    jsonl::write_atomic(dir / "config.json", default_config(opts.seed).dump(2) + "\n");
    jsonl::json manifest = {{"fixture_version", kFixtureVersion},
                            {"seed", opts.seed},
                            {"pts", fx.taxonomy.size()},
                            {"campaigns", fx.campaigns.size()},
                            {"exposures", fx.exposures.size()},
                            {"purchases", fx.purchases.size()}};
    jsonl::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace ptmap::fixtures

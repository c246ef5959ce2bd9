#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptmap/commands.hpp"

namespace {

using namespace ptmap;
namespace fs = std::filesystem;

struct Overrides {
    std::optional<double> tau;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallelism;
    std::optional<std::string> out_dir;
    std::optional<std::string> window;
};

RunConfig resolve_config(const std::string& path, const Overrides& o)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config", "cannot read '" + path + "'");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config", "expected a JSON object");
    }
    if (o.tau) {
        doc["tau"] = *o.tau;
    }
    if (o.seed) {
        doc["seed"] = *o.seed;
    }
    if (o.parallelism) {
        doc["parallelism"] = *o.parallelism;
    }
    if (o.window) {
        doc["label"]["window"] = *o.window;
    }
    const fs::path p(path);
    auto cfg = parse_run_config(doc, p.has_parent_path() ? p.parent_path() : fs::path("."));
    if (o.out_dir) {
        cfg.output_dir = *o.out_dir;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Map marketing campaigns onto a product-type taxonomy, label purchases and evaluate"};
    app.require_subcommand(1);

    std::string config_path = "config.json";
    Overrides o;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Run config (JSON)")->capture_default_str();
        sub->add_option_function<double>("--tau", [&](double v) { o.tau = v; }, "Dense similarity threshold");
        sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { o.seed = v; }, "Mock provider seed");
        sub->add_option_function<std::size_t>("--parallelism", [&](std::size_t v) { o.parallelism = v; },
                                               "Campaigns in flight");
        sub->add_option_function<std::string>("--out-dir", [&](const std::string& v) { o.out_dir = v; },
                                              "Output directory");
    };

    auto* index = app.add_subcommand("index", "Build and persist the dense and BM25 indexes");
    add_config(index);

    cli::MapOptions map_opts;
    std::string map_output;
    auto* map = app.add_subcommand("map", "Run one system over a campaigns file");
    add_config(map);
    map->add_option("--campaigns", map_opts.campaigns, "Campaigns JSONL")->required();
    map->add_option("-s,--system", map_opts.system,
                    "pipeline, bm25, zero_shot, dense@<tau>, or an ablation variant")
        ->capture_default_str();
    map->add_option("-o,--output", map_output, "Coverage JSONL (default <out-dir>/coverage_<system>.jsonl)");
    map->add_flag("--continue-on-error", map_opts.continue_on_error, "Log and skip failing campaigns");

    cli::LabelOptions label_opts;
    std::string label_output;
    auto* label = app.add_subcommand("label", "Build user-campaign purchase labels");
    add_config(label);
    label->add_option("--coverage", label_opts.coverage, "Coverage JSONL")->required();
    label->add_option("--exposures", label_opts.exposures, "Exposures JSONL")->required();
    label->add_option("--purchases", label_opts.purchases, "Purchases JSONL")->required();
    label->add_option_function<std::string>("--window", [&](const std::string& v) { o.window = v; },
                                            "Attribution window: milliseconds, 7d, 12h, ... or inf");
    label->add_option("-o,--output", label_output, "Labels JSONL (default <out-dir>/labels.jsonl)");

    cli::EvalOptions eval_opts;
    std::string mode = "human";
    std::vector<std::string> coverage_files;
    std::string truth, eval_campaigns, eval_output;
    auto* eval = app.add_subcommand("eval", "Evaluate coverage against truth or the judge");
    add_config(eval);
    eval->add_option("--mode", mode, "human or judge")
        ->check(CLI::IsMember({"human", "judge"}))
        ->capture_default_str();
    eval->add_option("--coverage", coverage_files, "Coverage JSONL, one or more")->required();
    eval->add_option("--truth", truth, "Truth JSONL");
    eval->add_option("--campaigns", eval_campaigns, "Campaigns JSONL (judge mode)");
    eval->add_option("-o,--output", eval_output, "Report JSON (default <out-dir>/report_<mode>.json)");

    cli::AblateOptions ablate_opts;
    std::string ablate_dir;
    auto* ablate = app.add_subcommand("ablate", "Run the four ablation variants and judge them");
    add_config(ablate);
    ablate->add_option("--campaigns", ablate_opts.campaigns, "Campaigns JSONL")->required();
    ablate->add_option("-o,--output-dir", ablate_dir, "Output directory (default <out-dir>/ablation)");

    fixtures::FixtureOptions fx_opts;
    std::string fx_dir = "fixture";
    auto* fx = app.add_subcommand("fixtures", "Write the seeded synthetic fixture");
    fx->add_option("-o,--output-dir", fx_dir, "Destination directory")->capture_default_str();
    fx->add_option("--seed", fx_opts.seed, "Generator seed")->capture_default_str();
    fx->add_option("--campaigns", fx_opts.campaigns, "Number of campaigns")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}))
        ->capture_default_str();
    fx->add_option("--users", fx_opts.users, "Number of users")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kConfig;
    }

    try {
        if (*fx) {
            return cli::cmd_fixtures(fx_dir, fx_opts);
        }
        const auto cfg = resolve_config(config_path, o);
        if (*index) {
            return cli::cmd_index(cfg);
        }
        if (*map) {
            if (!map_output.empty()) {
                map_opts.output = map_output;
            }
            return cli::cmd_map(cfg, map_opts);
        }
        if (*label) {
            if (!label_output.empty()) {
                label_opts.output = label_output;
            }
            return cli::cmd_label(cfg, label_opts);
        }
        if (*eval) {
            eval_opts.mode = mode == "judge" ? EvalMode::judge : EvalMode::human;
            for (const auto& f : coverage_files) {
                eval_opts.coverage.emplace_back(f);
            }
            if (!truth.empty()) {
                eval_opts.truth = truth;
            }
            if (!eval_campaigns.empty()) {
                eval_opts.campaigns = eval_campaigns;
            }
            if (!eval_output.empty()) {
                eval_opts.output = eval_output;
            }
            return cli::cmd_eval(cfg, eval_opts);
        }
        if (*ablate) {
            if (!ablate_dir.empty()) {
                ablate_opts.output_dir = ablate_dir;
            }
            return cli::cmd_ablate(cfg, ablate_opts);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return cli::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUnexpected;
    }
    return cli::kUnexpected;
}

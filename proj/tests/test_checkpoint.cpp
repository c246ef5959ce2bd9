#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "ptmap/checkpoint.hpp"
#include "support.hpp"

using namespace ptmap;

namespace {

std::vector<Campaign> campaigns(int n)
{
    std::vector<Campaign> out;
    for (int i = 1; i <= n; ++i) {
        out.push_back(Campaign{"c" + std::to_string(i), "title " + std::to_string(i), ""});
    }
    return out;
}

CoverageSet fake_coverage(const Campaign& c, const std::string& system = "pipeline")
{
    return CoverageSet{c.id, system, {{"pt-" + c.id, Grade::strong, 0.5, "DENSE"}}, std::string("sum " + c.id),
                       std::nullopt};
}

std::vector<std::string> campaign_ids(const std::filesystem::path& path)
{
    std::vector<std::string> ids;
    for (const auto& cov : load_coverage(path)) {
        ids.push_back(cov.campaign_id);
    }
    return ids;
}

}  // namespace

TEST(Checkpoint, ResumeSkipsCompletedCampaigns)
{
    ptmap::testing::TempDir dir;
    const auto path = dir / "coverage.jsonl";
    const auto all = campaigns(5);
    std::ostringstream log;
    {
        CoverageCheckpoint cp(path, "pipeline");
        std::atomic<int> calls{0};
        EXPECT_THROW(run_batch(
                         all, cp,
                         [&](const Campaign& c) {
                             if (++calls == 4) {
                                 throw ProviderUnavailable("killed");
                             }
                             return fake_coverage(c);
                         },
                         {}, log),
                     ProviderUnavailable);
    }
    EXPECT_EQ(campaign_ids(path), (std::vector<std::string>{"c1", "c2", "c3"}));

    std::vector<std::string> recomputed;
    CoverageCheckpoint cp(path, "pipeline");
    EXPECT_EQ(cp.completed(), 3u);
    auto result = run_batch(
        all, cp,
        [&](const Campaign& c) {
            recomputed.push_back(c.id);
            return fake_coverage(c);
        },
        {}, log);
    EXPECT_EQ(recomputed, (std::vector<std::string>{"c4", "c5"}));
    EXPECT_EQ(result.skipped, 3u);
    EXPECT_EQ(result.computed, 2u);
    EXPECT_EQ(campaign_ids(path), (std::vector<std::string>{"c1", "c2", "c3", "c4", "c5"}));
}

TEST(Checkpoint, TrailingPartialLineIsDropped)
{
    ptmap::testing::TempDir dir;
    const auto path = dir / "coverage.jsonl";
    const auto line = jsonl::dump_line(to_json(fake_coverage(campaigns(1)[0])));
    ptmap::testing::write_file(path, line + "\n" + R"({"campaign_id":"c2","sys)");
    CoverageCheckpoint cp(path, "pipeline");
    EXPECT_EQ(cp.completed(), 1u);
    EXPECT_TRUE(cp.done("c1"));
    EXPECT_EQ(ptmap::testing::read_file(path), line + "\n");
}

TEST(Checkpoint, CorruptInteriorLineIsAnError)
{
    ptmap::testing::TempDir dir;
    const auto path = dir / "coverage.jsonl";
    const auto line = jsonl::dump_line(to_json(fake_coverage(campaigns(1)[0])));
    ptmap::testing::write_file(path, "{broken\n" + line + "\n");
    EXPECT_THROW(CoverageCheckpoint(path, "pipeline"), MalformedRecord);
}

TEST(Checkpoint, DifferentSystemIsRejected)
{
    ptmap::testing::TempDir dir;
    const auto path = dir / "coverage.jsonl";
    ptmap::testing::write_file(path, jsonl::dump_line(to_json(fake_coverage(campaigns(1)[0], "bm25"))) + "\n");
    EXPECT_THROW(CoverageCheckpoint(path, "pipeline"), ConfigError);
}

TEST(Batch, ParallelOutputKeepsInputOrder)
{
    ptmap::testing::TempDir dir;
    const auto all = campaigns(12);
    std::ostringstream log;
    CoverageCheckpoint cp(dir / "coverage.jsonl", "pipeline");
    auto result = run_batch(
        all, cp,
        [&](const Campaign& c) {
            // Early campaigns finish last.
            std::this_thread::sleep_for(std::chrono::milliseconds(5 * (13 - std::stoi(c.id.substr(1))) % 23));
            return fake_coverage(c);
        },
        BatchOptions{4, false}, log);
    EXPECT_EQ(result.computed, 12u);
    std::vector<std::string> expected;
    for (const auto& c : all) {
        expected.push_back(c.id);
    }
    EXPECT_EQ(campaign_ids(dir / "coverage.jsonl"), expected);
}

TEST(Batch, ContinueOnErrorSkipsAndLogs)
{
    ptmap::testing::TempDir dir;
    std::ostringstream log;
    CoverageCheckpoint cp(dir / "coverage.jsonl", "pipeline");
    auto result = run_batch(
        campaigns(4), cp,
        [&](const Campaign& c) {
            if (c.id == "c2") {
                throw Timeout("slow provider");
            }
            return fake_coverage(c);
        },
        BatchOptions{2, true}, log);
    EXPECT_EQ(result.computed, 3u);
    EXPECT_EQ(result.failed, 1u);
    EXPECT_NE(log.str().find("slow provider"), std::string::npos);
    EXPECT_EQ(campaign_ids(dir / "coverage.jsonl"), (std::vector<std::string>{"c1", "c3", "c4"}));
}

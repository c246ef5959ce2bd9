#include <gtest/gtest.h>

#include "ptmap/jsonl.hpp"
#include "ptmap/text.hpp"
#include "support.hpp"

using namespace ptmap;

TEST(Text, NormalizeWhitespace)
{
    EXPECT_EQ(text::normalize_whitespace("  a \t b\n\nc  "), "a b c");
    EXPECT_EQ(text::normalize_whitespace(""), "");
    EXPECT_EQ(text::normalize_whitespace(" \t\n"), "");
}

TEST(Text, TokenizeLowercasesAndSplitsOnPunctuation)
{
    EXPECT_EQ(text::tokenize("Office & Stationery | Money-Handling, 2x!"),
              (std::vector<std::string>{"office", "stationery", "money", "handling", "2x"}));
    EXPECT_TRUE(text::tokenize(" | & ").empty());
}

TEST(Text, SubstituteFillsKnownPlaceholdersOnly)
{
    const std::vector<std::pair<std::string, std::string>> values = {{"a", "x"}, {"b", "{a}"}};
    EXPECT_EQ(text::substitute("{a} and {b} but {c} {", values), "x and {a} but {c} {");
    EXPECT_EQ(text::substitute("{{a}}", values), "{x}");
}

TEST(Jsonl, SkipsBlankLinesAndReportsLineNumbers)
{
    std::istringstream in("{\"a\":1}\n\n  \n{\"a\":2}\n");
    std::vector<std::size_t> lines;
    jsonl::for_each_record(in, [&](const jsonl::json&, std::size_t line) { lines.push_back(line); });
    EXPECT_EQ(lines, (std::vector<std::size_t>{1, 4}));

    std::istringstream bad("{\"a\":1}\n{oops\n");
    try {
        jsonl::for_each_record(bad, [](const jsonl::json&, std::size_t) {});
        FAIL();
    } catch (const MalformedRecord& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Jsonl, WriteAtomicReplacesContent)
{
    ptmap::testing::TempDir dir;
    auto p = dir / "x.jsonl";
    jsonl::write_atomic(p, "one\n");
    jsonl::write_atomic(p, "two\n");
    EXPECT_EQ(ptmap::testing::read_file(p), "two\n");
    EXPECT_FALSE(std::filesystem::exists(dir / "x.jsonl.tmp"));
}

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "ptmap/config.hpp"
#include "ptmap/http_providers.hpp"
#include "ptmap/mock_providers.hpp"
#include "ptmap/prompts.hpp"
#include "support.hpp"

using namespace ptmap;
using json = nlohmann::json;

namespace {

const std::string kCampaign = "Farm-fresh picks or your money returned | Fresh produce, restocked every morning in our stores.";

mock::Lexicon produce_lexicon()
{
    mock::Lexicon lex;
    lex.add("produce", {"fruit", "vegetables", "groceries"});
    return lex;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grades and vectors

TEST(Grade, StrictParse)
{
    EXPECT_EQ(parse_grade("STRONG"), Grade::strong);
    EXPECT_EQ(parse_grade("  weak\n"), Grade::weak);
    EXPECT_EQ(parse_grade("Irrelevant"), Grade::irrelevant);
    for (const char* bad : {"", "STRONG.", "very strong", "STRONG WEAK", "relevant", "STRONGLY"}) {
        EXPECT_THROW(parse_grade(bad), UnparseableResponse) << bad;
    }
}

TEST(Vectors, DotChecksDimension)
{
    EmbeddingVector a{{1.0, 0.0}}, b{{1.0, 0.0, 0.0}};
    EXPECT_THROW((void)dot(a, b), DimensionMismatch);
}

TEST(Vectors, NormalizeLeavesZeroVectorAlone)
{
    EmbeddingVector z{{0.0, 0.0, 0.0}};
    l2_normalize(z);
    EXPECT_TRUE(z.is_zero());
    EmbeddingVector v{{3.0, 4.0}};
    l2_normalize(v);
    EXPECT_DOUBLE_EQ(v.values[0], 0.6);
    EXPECT_DOUBLE_EQ(v.values[1], 0.8);
}

// ---------------------------------------------------------------------------
// Mock providers

TEST(MockEmbedder, DeterministicUnitVectors)
{
    mock::LexicalEmbedder e("m", 64, 3);
    auto a = e.embed("Fresh produce, restocked daily");
    auto b = e.embed("fresh   PRODUCE restocked daily!");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.dimension(), 64u);
    EXPECT_NEAR(dot(a, a), 1.0, 1e-12);
    EXPECT_TRUE(e.embed("  | & ").is_zero());
}

TEST(MockEmbedder, SeedChangesBuckets)
{
    mock::LexicalEmbedder a("m", 1 << 16, 1), b("m", 1 << 16, 2);
    int moved = 0;
    for (const char* t : {"apples", "money", "fresh", "produce", "cash", "bags", "tea", "rice"}) {
        moved += a.bucket(t) != b.bucket(t) ? 1 : 0;
    }
    EXPECT_GT(moved, 4);
}

TEST(MockEmbedder, CosineTracksTokenOverlap)
{
    mock::LexicalEmbedder e("m", 4096, 0);
    auto q = e.embed("fresh produce");
    auto close = e.embed("Food | Fresh Produce | Apples");
    auto far = e.embed("Electronics | Audio Equipment | Wireless Headphones");
    EXPECT_GT(cosine(q, close), 0.5);
    EXPECT_LT(cosine(q, far), 0.1);
}

TEST(MockInterpreter, AppendsLexiconExpansionsOnce)
{
    mock::RuleModel model("interp", produce_lexicon());
    EXPECT_EQ(model.interpret(kCampaign), kCampaign + " fruit vegetables groceries");
    EXPECT_EQ(model.interpret("  produce   and produce "), "produce and produce fruit vegetables groceries");
    EXPECT_EQ(model.interpret("nothing to expand"), "nothing to expand");
    EXPECT_THROW((void)model.interpret("   "), EmptyResponse);
}

TEST(MockLexicon, LoadsJsonl)
{
    ptmap::testing::TempDir dir;
    ptmap::testing::write_file(dir / "lex.jsonl",
                               R"({"token":"Produce","expansions":["fruit","vegetables","fruit"]})"
                               "\n");
    auto lex = mock::load_lexicon(dir / "lex.jsonl");
    ASSERT_NE(lex.find("produce"), nullptr);
    EXPECT_EQ(*lex.find("produce"), (std::vector<std::string>{"fruit", "vegetables"}));
    ptmap::testing::write_file(dir / "bad.jsonl", R"({"token":"x","expansions":"fruit"})");
    EXPECT_THROW(mock::load_lexicon(dir / "bad.jsonl"), MalformedRecord);
}

TEST(MockRules, ContainmentGrades)
{
    EXPECT_EQ(mock::grade_by_rule("we sell wireless headphones", "Electronics | Audio Equipment | Wireless Headphones"),
              Grade::strong);
    EXPECT_EQ(mock::grade_by_rule("audio equipment sale", "Electronics | Audio Equipment | Wireless Headphones"),
              Grade::weak);
    EXPECT_EQ(mock::grade_by_rule("wireless audio", "Electronics | Audio Equipment | Wireless Headphones"),
              Grade::irrelevant);
    EXPECT_EQ(mock::grade_by_rule(kCampaign, "Office & Stationery | Money Handling | Money Deposit Bags"),
              Grade::irrelevant);
    EXPECT_EQ(mock::grade_by_rule(kCampaign, "Food | Fresh Produce | Apples"), Grade::weak);
}

TEST(MockRules, SetScoreIsRelevantFraction)
{
    mock::RuleModel judge("judge");
    std::vector<std::string> pts = {"Food | Fresh Produce | Apples", "Office & Stationery | Money Handling | Cash Registers"};
    EXPECT_DOUBLE_EQ(judge.judge_set_score(kCampaign, pts), 0.5);
    EXPECT_THROW((void)judge.judge_set_score(kCampaign, std::span<const std::string>{}), UnparseableResponse);
}

TEST(MockRules, SelectReturnsJsonArrayOfOverlappingTypes)
{
    mock::RuleModel selector("sel");
    std::vector<PtChoice> chunk = {{"pt1", "Food | Fresh Produce | Apples"},
                                   {"pt4", "Office & Stationery | Money Handling | Money Deposit Bags"},
                                   {"pt6", "Electronics | Audio Equipment | Wireless Headphones"}};
    EXPECT_EQ(selector.select_pts("money back on apples", chunk), R"(["pt1","pt4"])");
    EXPECT_EQ(selector.select_pts("nothing", chunk), "[]");
}

TEST(MockScorer, TokenJaccard)
{
    mock::OverlapScorer s("r");
    EXPECT_DOUBLE_EQ(s.score("a b c", "b c d"), 0.5);
    EXPECT_DOUBLE_EQ(s.score("a", "b"), 0.0);
    EXPECT_DOUBLE_EQ(s.score("", ""), 0.0);
}

// ---------------------------------------------------------------------------
// Prompts

TEST(Prompts, ClassifyPromptMatchesGolden)
{
    auto prompt = prompts::render(prompts::kClassify,
                                  {{"summary", "a grocery campaign about fresh fruit and vegetables"},
                                   {"pt", "Food | Fresh Produce | Apples"}});
    EXPECT_EQ(prompt, ptmap::testing::read_file(std::filesystem::path(PTMAP_TEST_DATA) / "classify_prompt.golden"));
}

TEST(Prompts, ValuesAreNotRescanned)
{
    auto prompt = prompts::render("{summary} / {pt}", {{"summary", "contains {pt}"}, {"pt", "P"}});
    EXPECT_EQ(prompt, "contains {pt} / P");
}

TEST(Prompts, ListsAreNumberedAndIdTagged)
{
    std::vector<std::string> items = {"A | B | C", "D | E | F"};
    EXPECT_EQ(prompts::numbered_list(items), "1. A | B | C\n2. D | E | F");
    std::vector<PtChoice> chunk = {{"p1", "A | B | C"}};
    EXPECT_EQ(prompts::choice_list(chunk), "p1: A | B | C");
}

TEST(Prompts, OverridesReplaceRoles)
{
    prompts::Templates t;
    t.apply({{"judge", "J {campaign} {pt}"}});
    EXPECT_EQ(t.judge, "J {campaign} {pt}");
    EXPECT_EQ(t.classify, prompts::kClassify);
}

// ---------------------------------------------------------------------------
// Strict answer parsers

TEST(Parsers, UnitScore)
{
    EXPECT_DOUBLE_EQ(http::parse_unit_score("0.8"), 0.8);
    EXPECT_DOUBLE_EQ(http::parse_unit_score("Score: 1"), 1.0);
    EXPECT_DOUBLE_EQ(http::parse_unit_score(" .25\n"), 0.25);
    for (const char* bad : {"", "high", "0.8 or 0.9", "1.5", "-0.1", "between 0 and 1"}) {
        EXPECT_THROW(http::parse_unit_score(bad), UnparseableResponse) << bad;
    }
}

TEST(Parsers, GradeLines)
{
    EXPECT_EQ(http::parse_grade_lines("STRONG\n weak \n\nIRRELEVANT\n", 3),
              (std::vector<Grade>{Grade::strong, Grade::weak, Grade::irrelevant}));
    EXPECT_THROW(http::parse_grade_lines("STRONG\nWEAK", 3), UnparseableResponse);
    EXPECT_THROW(http::parse_grade_lines("STRONG\n1. WEAK", 2), UnparseableResponse);
}

// ---------------------------------------------------------------------------
// HTTP providers against an in-process server

namespace {

class FakeServer {
  public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&, int attempt)>;

    explicit FakeServer(Handler handler) : m_handler(std::move(handler))
    {
        m_server.Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
            int attempt = ++m_calls;
            {
                std::lock_guard lock(m_mu);
                m_bodies.push_back(req.body);
                m_auth.push_back(req.get_header_value("Authorization"));
                m_paths.push_back(req.path);
            }
            m_handler(req, res, attempt);
        });
        m_port = m_server.bind_to_any_port("127.0.0.1");
        m_thread = std::thread([this] { m_server.listen_after_bind(); });
        m_server.wait_until_ready();
    }
    ~FakeServer()
    {
        m_server.stop();
        m_thread.join();
    }

    [[nodiscard]] std::string url(const std::string& path = "/v1/run") const
    {
        return "http://127.0.0.1:" + std::to_string(m_port) + path;
    }
    [[nodiscard]] int calls() const { return m_calls; }
    [[nodiscard]] json body(std::size_t i) const
    {
        std::lock_guard lock(m_mu);
        return json::parse(m_bodies.at(i));
    }
    [[nodiscard]] std::string auth(std::size_t i) const
    {
        std::lock_guard lock(m_mu);
        return m_auth.at(i);
    }
    [[nodiscard]] std::string path(std::size_t i) const
    {
        std::lock_guard lock(m_mu);
        return m_paths.at(i);
    }

  private:
    Handler m_handler;
    httplib::Server m_server;
    int m_port = 0;
    std::thread m_thread;
    std::atomic<int> m_calls{0};
    mutable std::mutex m_mu;
    std::vector<std::string> m_bodies;
    std::vector<std::string> m_auth;
    std::vector<std::string> m_paths;
};

ProviderConfig http_config(const std::string& endpoint)
{
    ProviderConfig cfg;
    cfg.kind = ProviderKind::http;
    cfg.model_id = "remote-model";
    cfg.endpoint = endpoint;
    cfg.timeout_ms = 2000;
    cfg.max_retries = 2;
    cfg.backoff_ms = 1;
    cfg.dimension = 3;
    return cfg;
}

void reply(httplib::Response& res, const json& body) { res.set_content(body.dump(), "application/json"); }

void reply_output(httplib::Response& res, const std::string& output) { reply(res, {{"output", output}}); }

}  // namespace

TEST(HttpEmbedder, WireFormatAndBearerToken)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) {
        reply(res, {{"embeddings", {{3.0, 0.0, 4.0}}}});
    });
    ::setenv("PTMAP_TEST_TOKEN", "s3cret", 1);
    auto cfg = http_config(server.url("/embed"));
    cfg.token_env = "PTMAP_TEST_TOKEN";
    http::HttpEmbedder embedder(cfg);
    auto v = embedder.embed("Fresh produce");
    EXPECT_DOUBLE_EQ(v.values[0], 0.6);
    EXPECT_DOUBLE_EQ(v.values[2], 0.8);
    ASSERT_EQ(server.calls(), 1);
    EXPECT_EQ(server.body(0), (json{{"model", "remote-model"}, {"input", {"Fresh produce"}}}));
    EXPECT_EQ(server.auth(0), "Bearer s3cret");
    EXPECT_EQ(server.path(0), "/embed");
    ::unsetenv("PTMAP_TEST_TOKEN");
}

TEST(HttpEmbedder, EmptyTextSkipsTheCall)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) {
        reply(res, {{"embeddings", {{1.0, 0.0, 0.0}}}});
    });
    http::HttpEmbedder embedder(http_config(server.url()));
    EXPECT_TRUE(embedder.embed("   ").is_zero());
    EXPECT_EQ(server.calls(), 0);
}

TEST(HttpEmbedder, WrongDimensionIsRejected)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) {
        reply(res, {{"embeddings", {{1.0, 0.0}}}});
    });
    http::HttpEmbedder embedder(http_config(server.url()));
    EXPECT_THROW((void)embedder.embed("x"), DimensionMismatch);
}

TEST(HttpTransport, RetriesServerErrorsThenSucceeds)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int attempt) {
        if (attempt == 1) {
            res.status = 503;
            return;
        }
        if (attempt == 2) {
            res.status = 429;
            return;
        }
        reply_output(res, "STRONG");
    });
    http::HttpLanguageModel model(http_config(server.url()));
    EXPECT_EQ(model.classify("summary", "A | B | C"), Grade::strong);
    EXPECT_EQ(server.calls(), 3);
}

TEST(HttpTransport, ExhaustedRetriesRaiseProviderUnavailable)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) { res.status = 500; });
    http::HttpLanguageModel model(http_config(server.url()));
    try {
        (void)model.classify("summary", "A | B | C");
        FAIL() << "expected ProviderUnavailable";
    } catch (const Timeout&) {
        FAIL() << "not a timeout";
    } catch (const ProviderUnavailable& e) {
        EXPECT_NE(std::string(e.what()).find("HTTP 500"), std::string::npos);
    }
    EXPECT_EQ(server.calls(), 3);
}

TEST(HttpTransport, ClientErrorsAreNotRetried)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) { res.status = 401; });
    http::HttpLanguageModel model(http_config(server.url()));
    EXPECT_THROW((void)model.classify("summary", "A | B | C"), ProviderUnavailable);
    EXPECT_EQ(server.calls(), 1);
}

TEST(HttpTransport, SlowServerRaisesTimeout)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        reply_output(res, "STRONG");
    });
    auto cfg = http_config(server.url());
    cfg.timeout_ms = 100;
    cfg.max_retries = 1;
    http::HttpLanguageModel model(cfg);
    EXPECT_THROW((void)model.classify("summary", "A | B | C"), Timeout);
}

TEST(HttpTransport, NonJsonBodyIsUnparseableAndNotRetried)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) {
        res.set_content("<html>oops</html>", "text/html");
    });
    http::HttpLanguageModel model(http_config(server.url()));
    try {
        (void)model.classify("summary", "A | B | C");
        FAIL();
    } catch (const UnparseableResponse& e) {
        EXPECT_EQ(e.raw(), "<html>oops</html>");
    }
    EXPECT_EQ(server.calls(), 1);
}

TEST(HttpTransport, RefusedConnectionIsUnavailable)
{
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    auto cfg = http_config("http://127.0.0.1:" + std::to_string(port) + "/x");
    cfg.max_retries = 1;
    http::HttpLanguageModel model(cfg);
    EXPECT_THROW((void)model.interpret("campaign"), ProviderUnavailable);
}

TEST(HttpTransport, BadEndpointIsConfigError)
{
    EXPECT_THROW(http::HttpLanguageModel(http_config("localhost:8080")), ConfigError);
}

TEST(HttpLanguageModel, PromptsCarryTheInputs)
{
    FakeServer server([](const httplib::Request& req, httplib::Response& res, int) {
        auto prompt = json::parse(req.body).at("prompt").get<std::string>();
        if (prompt.find("semantic summary") != std::string::npos) {
            reply_output(res, "  groceries and   fresh produce \n");
        } else if (prompt.find("Rate from 0 to 1") != std::string::npos) {
            reply_output(res, "0.75");
        } else {
            reply_output(res, "weak");
        }
    });
    http::HttpLanguageModel model(http_config(server.url()));
    EXPECT_EQ(model.interpret(kCampaign), "groceries and fresh produce");
    EXPECT_NE(server.body(0).at("prompt").get<std::string>().find(kCampaign), std::string::npos);
    EXPECT_EQ(server.body(0).at("model"), "remote-model");

    EXPECT_EQ(model.judge(kCampaign, "Food | Fresh Produce | Apples"), Grade::weak);
    auto judge_prompt = server.body(1).at("prompt").get<std::string>();
    EXPECT_NE(judge_prompt.find("Food | Fresh Produce | Apples"), std::string::npos);

    std::vector<std::string> pts = {"Food | Fresh Produce | Apples"};
    EXPECT_DOUBLE_EQ(model.judge_set_score(kCampaign, pts), 0.75);
    EXPECT_NE(server.body(2).at("prompt").get<std::string>().find("1. Food | Fresh Produce | Apples"),
              std::string::npos);
}

TEST(HttpLanguageModel, EmptyInterpretationIsAnError)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) { reply_output(res, " \n "); });
    http::HttpLanguageModel model(http_config(server.url()));
    EXPECT_THROW((void)model.interpret("campaign"), EmptyResponse);
}

TEST(HttpLanguageModel, MissingOutputFieldIsUnparseable)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) { reply(res, {{"text", "STRONG"}}); });
    http::HttpLanguageModel model(http_config(server.url()));
    EXPECT_THROW((void)model.classify("s", "A | B | C"), UnparseableResponse);
}

TEST(HttpLanguageModel, BatchedClassificationSendsOneRequestPerBatch)
{
    FakeServer server([](const httplib::Request& req, httplib::Response& res, int) {
        auto prompt = json::parse(req.body).at("prompt").get<std::string>();
        reply_output(res, prompt.find("2. ") != std::string::npos ? "STRONG\nIRRELEVANT" : "WEAK");
    });
    auto cfg = http_config(server.url());
    cfg.batch_size = 2;
    http::HttpLanguageModel model(cfg);
    std::vector<std::string> pts = {"A | B | C", "D | E | F", "G | H | I"};
    EXPECT_EQ(model.classify_batch("summary", pts),
              (std::vector<Grade>{Grade::strong, Grade::irrelevant, Grade::weak}));
    EXPECT_EQ(server.calls(), 2);
}

TEST(HttpLanguageModel, ConfiguredPromptOverride)
{
    FakeServer server([](const httplib::Request&, httplib::Response& res, int) { reply_output(res, "STRONG"); });
    auto cfg = http_config(server.url());
    cfg.prompts["classify"] = "S={summary} P={pt}";
    http::HttpLanguageModel model(cfg);
    (void)model.classify("sum", "A | B | C");
    EXPECT_EQ(server.body(0).at("prompt"), "S=sum P=A | B | C");
}

TEST(HttpPairScorer, WireFormatAndRange)
{
    std::atomic<double> score{0.4};
    FakeServer server([&](const httplib::Request&, httplib::Response& res, int) {
        reply(res, {{"scores", {score.load()}}});
    });
    http::HttpPairScorer scorer(http_config(server.url()));
    EXPECT_DOUBLE_EQ(scorer.score("query", "doc"), 0.4);
    EXPECT_EQ(server.body(0), (json{{"model", "remote-model"}, {"query", "query"}, {"documents", {"doc"}}}));
    score = 1.4;
    EXPECT_THROW((void)scorer.score("query", "doc"), UnparseableResponse);
}

TEST(ProviderFactory, BuildsMockAndHttp)
{
    ProviderConfig mock_cfg;
    mock_cfg.model_id = "lex";
    mock_cfg.dimension = 32;
    auto e = make_embedder(mock_cfg);
    EXPECT_EQ(e->dimension(), 32u);
    EXPECT_NE(dynamic_cast<mock::LexicalEmbedder*>(e.get()), nullptr);
    auto http_cfg = http_config("http://127.0.0.1:9/x");
    EXPECT_NE(dynamic_cast<http::HttpLanguageModel*>(make_language_model(http_cfg).get()), nullptr);
    EXPECT_NE(dynamic_cast<http::HttpPairScorer*>(make_pair_scorer(http_cfg).get()), nullptr);
}

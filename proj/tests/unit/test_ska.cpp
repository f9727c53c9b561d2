#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "strata/common/errors.hpp"
#include "strata/common/image.hpp"
#include "strata/llm/scripted_backend.hpp"
#include "strata/ska/analyzer.hpp"
#include "test_util.hpp"

using namespace strata;
using namespace strata::ska;
using llm::ModelRole;
namespace fs = std::filesystem;

namespace {

const std::string kSentinel = "PAYLOAD-SENTINEL-7731";

store::TableRecord make_table(std::string id, std::string title, std::string variable) {
    store::TableRecord t;
    t.id = std::move(id);
    t.title = std::move(title);
    t.summary = "Summary of " + t.title;
    t.schema_comment = "# " + variable + " = [...]\n# - year (int): calendar year\n# - value (float): annual value";
    t.payload = nlohmann::json::array({{{"year", 2019}, {"value", 1.0}},
                                       {{"year", 2020}, {"value", 2.0}},
                                       {{"year", kSentinel}, {"value", 3.0}}});
    return t;
}

struct Harness {
    std::shared_ptr<llm::ScriptedBackend> backend = std::make_shared<llm::ScriptedBackend>();
    llm::Gateway gateway{llm::GatewayConfig{}, backend};
    llm::ExchangeLog log;
    store::KnowledgeStore store;
    ScriptedSandbox sandbox;
    strata::testing::TempDir dir;
    std::unique_ptr<StructuredAnalyzer> ska;

    explicit Harness(SkaOptions options = {}, Sandbox* sandbox_override = nullptr) {
        // Three tables on a 2-D circle; the query vector sits closest to T1,
        // then T2, then T3.
        auto t1 = make_table("T1", "Real GDP growth of Canada", "real_gdp_growth_of_canada");
        auto t2 = make_table("T2", "Art trade volumes by region", "art_trade_volumes");
        auto t3 = make_table("T3", "Museum visitors", "museum_visitors");
        backend->add_embedding(t1.description_text(), {1.0, 0.0});
        backend->add_embedding(t2.description_text(), {0.8, 0.6});
        backend->add_embedding(t3.description_text(), {0.0, 1.0});
        backend->add_embedding("growth trend", {0.99, 0.1});
        store.add_table(t1);
        store.add_table(t2);
        store.add_table(t3);
        store.prepare_index([this](const std::vector<std::string>& texts) { return gateway.embed(texts); });
        ska = std::make_unique<StructuredAnalyzer>(gateway, store, sandbox_override ? *sandbox_override : sandbox,
                                                   dir.path(), options);
    }
};

const SkaQuery kQuery{"growth trend", "S1"};

}  // namespace

TEST(Verdict, ParsesBothForms) {
    auto v = parse_verdict("VALID: developed countries decline faster");
    ASSERT_TRUE(v);
    EXPECT_TRUE(v->valid);
    EXPECT_EQ(v->insight, "developed countries decline faster");
    v = parse_verdict("Looking at it...\n**REGENERATE**: axis labels missing");
    ASSERT_TRUE(v);
    EXPECT_FALSE(v->valid);
    EXPECT_EQ(v->reason, "axis labels missing");
    EXPECT_FALSE(parse_verdict("VALIDATION pending"));
    EXPECT_FALSE(parse_verdict("looks fine"));
}

TEST(SandboxTables, SentinelBlocksExtracted) {
    const std::string out = "mean 2.0\n<<TABLE>>\n| a | b |\n| --- | --- |\n| 1 | 2 |\n<</TABLE>>\ndone\n";
    auto tables = extract_tables(out);
    ASSERT_EQ(tables.size(), 1u);
    EXPECT_EQ(tables[0], "| a | b |\n| --- | --- |\n| 1 | 2 |");
    EXPECT_EQ(strip_table_sentinels(out).find("<<TABLE>>"), std::string::npos);
}

TEST(RetrieveTable, RerankPicksSecondCandidate) {
    Harness h(SkaOptions{3});
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T2");
    auto t = h.ska->retrieve_table(kQuery, h.log);
    EXPECT_EQ(t.id, "T2");
    EXPECT_TRUE(h.ska->used_tables().contains("T2"));
    const auto ex = h.log.exchanges();
    const auto& prompt = ex.back().prompt.front().text;
    EXPECT_LT(prompt.find("[T1]"), prompt.find("[T2]"));
    EXPECT_LT(prompt.find("[T2]"), prompt.find("[T3]"));
}

TEST(RetrieveTable, SameQueryTwiceNeverReturnsTheFirstTable) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "[T1]");
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T1", 2);
    auto first = h.ska->retrieve_table(kQuery, h.log);
    auto second = h.ska->retrieve_table(kQuery, h.log);
    EXPECT_EQ(first.id, "T1");
    EXPECT_NE(second.id, "T1");
    EXPECT_EQ(second.id, "T2") << "unknown id twice falls back to the dense top-1 of what is left";
    EXPECT_EQ(h.ska->used_tables(), (std::set<std::string>{"T1", "T2"}));
}

TEST(RetrieveTable, UnknownIdTwiceFallsBackToDenseTop1) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T99", 2);
    auto t = h.ska->retrieve_table(kQuery, h.log);
    EXPECT_EQ(t.id, "T1");
    EXPECT_EQ(h.log.count_tag("ska.rerank"), 2u);
    const auto events = h.log.events();
    EXPECT_TRUE(std::any_of(events.begin(), events.end(),
                            [](const auto& e) { return e.level == "warn" && e.scope == "ska.rerank"; }));
}

TEST(RetrieveTable, SecondAnswerAfterRepromptIsUsed) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "is not one of the candidate ids", "T3");
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "the best one");
    EXPECT_EQ(h.ska->retrieve_table(kQuery, h.log).id, "T3");
}

TEST(RetrieveTable, SingleCandidateSkipsRerank) {
    Harness h(SkaOptions{1});
    EXPECT_EQ(h.ska->retrieve_table(kQuery, h.log).id, "T1");
    EXPECT_EQ(h.log.count(ModelRole::judge_text), 0u);
}

TEST(RetrieveTable, ExhaustedStoreIsAnalyzerError) {
    Harness h(SkaOptions{1});
    for (int i = 0; i < 3; ++i) h.ska->retrieve_table(kQuery, h.log);
    EXPECT_THROW(h.ska->retrieve_table(kQuery, h.log), AnalyzerError);
}

TEST(GenerateCode, PromptCarriesSchemaNotPayload) {
    Harness h;
    h.backend->add(ModelRole::coder, "real_gdp_growth_of_canada",
                   "```python\nimport statistics\nprint(statistics.mean(r['value'] for r in real_gdp_growth_of_canada))\n```");
    auto code = h.ska->generate_code(*h.store.table("T1"), kQuery, 1, "", h.log);
    EXPECT_NE(code.source.find("real_gdp_growth_of_canada"), std::string::npos);
    EXPECT_EQ(code.schema_comment, h.store.table("T1")->schema_comment);
    const auto prompt = h.log.exchanges().back().prompt.front().text;
    EXPECT_NE(prompt.find("# - value (float): annual value"), std::string::npos);
    EXPECT_EQ(prompt.find(kSentinel), std::string::npos);
}

TEST(GenerateCode, PriorErrorAppearsInPrompt) {
    Harness h;
    h.backend->add(ModelRole::coder, "KeyError: 'yeer'", "```python\nprint(1)\n```");
    auto code = h.ska->generate_code(*h.store.table("T1"), kQuery, 2, "KeyError: 'yeer'", h.log);
    EXPECT_EQ(code.attempt, 2);
    EXPECT_EQ(code.prior_error, "KeyError: 'yeer'");
}

TEST(GenerateCode, EmptyResponseIsFailedAttempt) {
    Harness h(SkaOptions{10, 1});
    h.backend->add(ModelRole::coder, "Write Python code", "```python\n```");
    h.backend->add(ModelRole::coder, "empty program", "```python\nprint('ok')\n```");
    h.sandbox.add({"print('ok')", 0, "ok\n"});
    auto exec = h.ska->execute_with_retry(*h.store.table("T1"), kQuery, "M1", "", h.log);
    EXPECT_EQ(exec.attempts, 2);
    EXPECT_EQ(h.sandbox.requests().size(), 1u) << "the empty program is never executed";
}

TEST(ExecuteWithRetry, RuntimeErrorThenFixSucceedsInTwoAttempts) {
    Harness h;
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nrow['yeer']\n```");
    h.backend->add(ModelRole::coder, "KeyError: 'yeer'", "```python\nrow['year']\n```");
    h.sandbox.add({"yeer", 1, "", "Traceback...\nKeyError: 'yeer'"});
    h.sandbox.add({"row['year']", 0, "2.0\n"});
    auto exec = h.ska->execute_with_retry(*h.store.table("T1"), kQuery, "M1", "", h.log);
    EXPECT_EQ(exec.attempts, 2);
    EXPECT_EQ(exec.result.status, ExecStatus::ok);
    EXPECT_EQ(h.log.count(ModelRole::coder), 2u);
}

TEST(ExecuteWithRetry, CeilingExceededCarriesLastStderr) {
    Harness h;
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nboom()\n```", 0);
    h.sandbox.add({"boom", 1, "", "NameError: name 'boom' is not defined"});
    try {
        h.ska->execute_with_retry(*h.store.table("T1"), kQuery, "M1", "", h.log);
        FAIL() << "expected AnalyzerError";
    } catch (const AnalyzerError& e) {
        EXPECT_NE(std::string(e.what()).find("NameError: name 'boom'"), std::string::npos);
    }
    EXPECT_EQ(h.log.count(ModelRole::coder), 4u) << "1 attempt + 3 retries";
}

TEST(ExecuteWithRetry, DataFileHoldsPayloadUnderVariableName) {
    Harness h;
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nprint(1)\n```");
    h.sandbox.add({"print(1)", 0, "1\n"});
    h.ska->execute_with_retry(*h.store.table("T1"), kQuery, "M1", "", h.log);
    const auto req = h.sandbox.requests().front();
    auto data = nlohmann::json::parse(strata::testing::read_file(req.data_file));
    EXPECT_EQ(data["variable"], "real_gdp_growth_of_canada");
    EXPECT_EQ(data["records"].size(), 3u);
    EXPECT_EQ(req.code.find(kSentinel), std::string::npos);
}

TEST(AnalyzeResult, EmptyOutputRegeneratesWithoutVisionCall) {
    Harness h;
    ExecutionResult r;
    r.status = ExecStatus::ok;
    r.stdout_text = "  \n";
    auto v = h.ska->analyze_result(r, kQuery, *h.store.table("T1"), h.log);
    EXPECT_FALSE(v.valid);
    EXPECT_EQ(v.reason, "empty result");
    EXPECT_EQ(h.log.size(), 0u);
}

TEST(AnalyzeResult, TextOnlyOutputUsesTextPath) {
    Harness h;
    h.backend->add(ModelRole::vision, "printed results", "VALID: mean is 2.0");
    ExecutionResult r;
    r.status = ExecStatus::ok;
    r.stdout_text = "mean 2.0\n";
    auto v = h.ska->analyze_result(r, kQuery, *h.store.table("T1"), h.log);
    EXPECT_TRUE(v.valid);
    EXPECT_TRUE(h.log.exchanges().back().prompt.front().images.empty());
}

TEST(Analyze, ValidFigureBecomesMaterial) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T1");
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nplt.savefig('x')\n```");
    h.sandbox.add({"plt.savefig", 0, "<<TABLE>>\n| year | value |\n| --- | --- |\n| 2019 | 1.0 |\n<</TABLE>>\n", "", 1});
    h.backend->add(ModelRole::vision, "attached figures", "VALID: developed countries decline faster");
    auto m = h.ska->analyze(kQuery, "M2", h.log);
    EXPECT_EQ(m.kind, MaterialKind::structured);
    EXPECT_EQ(m.verdict, "valid");
    EXPECT_EQ(m.insight, "developed countries decline faster");
    ASSERT_EQ(m.assets, std::vector<std::string>{"assets/M2_1.png"});
    EXPECT_TRUE(is_decodable_image(h.dir.path() / m.assets[0]));
    ASSERT_EQ(m.tables.size(), 1u);
    EXPECT_EQ(m.table_id, "T1");
    EXPECT_EQ(m.code_attempts, 1);
    EXPECT_FALSE(h.log.exchanges().back().prompt.front().images.empty());
}

TEST(Analyze, RegenerateFourTimesWithCeilingThreeIsError) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T1");
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nplt.savefig('x')\n```", 0);
    h.sandbox.add({"plt.savefig", 0, "", "", 1});
    h.backend->add(ModelRole::vision, "attached figures", "REGENERATE: unreadable axis", 4);
    EXPECT_THROW(h.ska->analyze(kQuery, "M2", h.log), AnalyzerError);
    EXPECT_EQ(h.log.count(ModelRole::vision), 4u);
    EXPECT_EQ(h.backend->unconsumed(), 0u);
}

TEST(Analyze, RegenerateReasonFeedsNextProgramAndAttemptsAddUp) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T1");
    h.backend->add(ModelRole::coder, "unreadable axis", "```python\nfixed_plot()\n```");
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nfirst_plot()\n```");
    h.sandbox.add({"first_plot", 0, "", "", 1});
    h.sandbox.add({"fixed_plot", 0, "", "", 2});
    h.backend->add(ModelRole::vision, "attached figures", "REGENERATE: unreadable axis");
    h.backend->add(ModelRole::vision, "attached figures", "VALID: growth slowed after 2019");
    auto m = h.ska->analyze(kQuery, "M3", h.log);
    EXPECT_EQ(m.validation_rounds, 2);
    EXPECT_EQ(m.assets.size(), 2u);
    EXPECT_EQ(static_cast<std::size_t>(m.code_attempts), h.log.count(ModelRole::coder));
}

TEST(Analyze, CoderPromptsNeverContainPayloadValues) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Select the most relevant table", "T1");
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nbad()\n```", 2);
    h.backend->add(ModelRole::coder, "Write Python code", "```python\nok_plot()\n```");
    h.sandbox.add({"bad()", 1, "", "ValueError: bad"});
    h.sandbox.add({"ok_plot", 0, "2.0\n", "", 1});
    h.backend->add(ModelRole::vision, "attached figures", "VALID: fine");
    h.ska->analyze(kQuery, "M4", h.log);
    for (const auto& e : h.log.exchanges()) {
        if (e.role != ModelRole::coder) continue;
        for (const auto& msg : e.prompt) EXPECT_EQ(msg.text.find(kSentinel), std::string::npos);
    }
}

class PythonSandbox : public ::testing::Test {
protected:
    void SetUp() override {
        if (std::system("python3 -c 'import json' >/dev/null 2>&1") != 0) GTEST_SKIP() << "python3 not available";
    }
    SubprocessSandbox sandbox{{"python3", std::string(STRATA_FIXTURES) + "/sandbox/fake_runner.py"}, 2};
    strata::testing::TempDir dir;

    SandboxRequest request(std::string code, nlohmann::json records, int timeout_s = 10) {
        const auto data = dir.path() / "data.json";
        std::ofstream(data) << nlohmann::json{{"variable", "x_values"}, {"records", records}}.dump();
        fs::create_directories(dir.path() / "run" / "assets");
        return {std::move(code), data, dir.path() / "run" / "assets", timeout_s};
    }
};

TEST_F(PythonSandbox, MeanOfOneTwoThreeIsTwo) {
    auto r = sandbox.run(request("print(sum(r['x'] for r in x_values) / len(x_values))",
                                 nlohmann::json::array({{{"x", 1}}, {{"x", 2}}, {{"x", 3}}})));
    EXPECT_EQ(r.status, ExecStatus::ok) << r.stderr_text;
    EXPECT_NE(r.stdout_text.find("2.0"), std::string::npos);
    EXPECT_TRUE(r.assets.empty());
}

TEST_F(PythonSandbox, RuntimeErrorCarriesStderr) {
    auto r = sandbox.run(request("x_values[0]['yeer']", nlohmann::json::array({{{"year", 1}}})));
    EXPECT_EQ(r.status, ExecStatus::runtime_error);
    EXPECT_NE(r.stderr_text.find("KeyError"), std::string::npos);
}

TEST_F(PythonSandbox, InfiniteLoopTimesOut) {
    auto r = sandbox.run(request("while True: pass", nlohmann::json::array({{{"x", 1}}}), 1));
    EXPECT_EQ(r.status, ExecStatus::timeout);
    EXPECT_NE(r.stderr_text.find("TIMEOUT"), std::string::npos);
    EXPECT_LT(r.wall_ms, 5000.0);
}

TEST_F(PythonSandbox, AssetListingMatchesDirectory) {
    auto r = sandbox.run(request("open(os.path.join(ASSET_DIR, 'figure_1.png'), 'wb').write(b'x')",
                                 nlohmann::json::array({{{"x", 1}}})));
    ASSERT_EQ(r.status, ExecStatus::ok) << r.stderr_text;
    ASSERT_EQ(r.assets.size(), 1u);
    EXPECT_EQ(r.assets[0].filename(), "figure_1.png");
}

TEST(Subprocess, RunnerKilledAfterGraceWhenItIgnoresTimeout) {
    strata::testing::TempDir dir;
    fs::create_directories(dir.path() / "run" / "assets");
    SubprocessSandbox sandbox({"sh", "-c", "sleep 30", "runner"}, 1);
    auto r = sandbox.run({"", dir.path() / "d.json", dir.path() / "run" / "assets", 1});
    EXPECT_EQ(r.status, ExecStatus::timeout);
    EXPECT_LT(r.wall_ms, 10000.0);
}

TEST(Subprocess, NonEmptyAssetDirRejected) {
    strata::testing::TempDir dir;
    fs::create_directories(dir.path() / "a");
    std::ofstream(dir.path() / "a" / "stale.png") << "x";
    SubprocessSandbox sandbox({"true"});
    EXPECT_THROW(sandbox.run({"", dir.path() / "d.json", dir.path() / "a", 1}), AnalyzerError);
}

#include <chrono>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "e2e_fixture.hpp"
#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/writer/markdown.hpp"
#include "test_util.hpp"

using namespace strata;
using namespace strata::planner;
using llm::ModelRole;
namespace fs = std::filesystem;

namespace {

struct Harness {
    std::shared_ptr<llm::ScriptedBackend> backend = std::make_shared<llm::ScriptedBackend>();
    llm::Gateway gateway{llm::GatewayConfig{}, backend};
    llm::ExchangeLog log;
    ResearchQuestion question{"q1", "How did Brexit affect the UK art market?", "art"};
};

std::string numbered(int n) {
    std::string s;
    for (int i = 1; i <= n; ++i) s += fmt::format("{}. Subtask {}: look into aspect {}\n", i, i, i);
    return s;
}

PlannerState researching(const Subtask& s, const ResearchQuestion& q, int calls = 0) {
    PlannerState st;
    st.question = &q;
    st.subtask = &s;
    st.calls_made = calls;
    return st;
}

}  // namespace

TEST(Directive, ParsesAnalyzerCalls) {
    auto p = parse_directive("CALL ska: regional art-trade volumes");
    ASSERT_TRUE(p.call);
    EXPECT_EQ(p.call->kind, ToolKind::ska);
    EXPECT_EQ(p.call->query, "regional art-trade volumes");
    p = parse_directive("Thinking first.\n**CALL uka: Brexit artist mobility**");
    ASSERT_TRUE(p.call);
    EXPECT_EQ(p.call->kind, ToolKind::uka);
    EXPECT_EQ(p.call->query, "Brexit artist mobility");
}

TEST(Directive, DoneAndFinishMeanWriteSubtask) {
    EXPECT_EQ(parse_directive("CALL finish:").call->kind, ToolKind::write_subtask);
    EXPECT_EQ(parse_directive("done").call->kind, ToolKind::write_subtask);
    EXPECT_EQ(parse_directive("CALL write_subtask: done").call->kind, ToolKind::write_subtask);
}

TEST(Directive, UnknownToolAndEmptyQueryRejected) {
    EXPECT_NE(parse_directive("CALL browse: x").problem.find("unknown tool 'browse'"), std::string::npos);
    EXPECT_FALSE(parse_directive("CALL uka:").call);
    EXPECT_FALSE(parse_directive("I would search the web").call);
}

TEST(Decompose, FourSubtasksGetOrdinalsOneToFour) {
    Harness h;
    h.backend->add(ModelRole::planner_chat, "Decompose", numbered(4));
    Planner p(h.gateway);
    auto subtasks = p.decompose(h.question, h.log);
    ASSERT_EQ(subtasks.size(), 4u);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(subtasks[static_cast<std::size_t>(i)].ordinal, i + 1);
        EXPECT_EQ(subtasks[static_cast<std::size_t>(i)].id, fmt::format("S{}", i + 1));
        EXPECT_EQ(subtasks[static_cast<std::size_t>(i)].status, SubtaskStatus::pending);
    }
    EXPECT_EQ(subtasks[1].title, "Subtask 2");
    EXPECT_EQ(subtasks[1].description, "look into aspect 2");
}

TEST(Decompose, TwelveTruncatedToEightWithWarning) {
    Harness h;
    h.backend->add(ModelRole::planner_chat, "Decompose", numbered(12));
    auto subtasks = Planner(h.gateway).decompose(h.question, h.log);
    ASSERT_EQ(subtasks.size(), 8u);
    EXPECT_EQ(subtasks.back().title, "Subtask 8");
    ASSERT_EQ(h.log.events().size(), 1u);
    EXPECT_EQ(h.log.events()[0].level, "warn");
}

TEST(Decompose, JsonReplyKeepsTheCaseStudySubtask) {
    Harness h;
    h.backend->add(ModelRole::planner_chat, "Decompose",
                   R"([{"title": "Trace art-market trade flows", "description": "EU vs non-EU"},
                       {"title": "Evaluate how institutional changes, such as Brexit-related regulatory shifts, affect mobility", "description": "visas"},
                       {"title": "Assess funding", "description": "museums"}])");
    auto subtasks = Planner(h.gateway).decompose(h.question, h.log);
    ASSERT_EQ(subtasks.size(), 3u);
    EXPECT_EQ(subtasks[1].title.rfind("Evaluate how institutional changes, such as Brexit-related regulatory shifts", 0), 0u);
}

TEST(Decompose, UnparseableAfterTwoRepromptsIsPlanningError) {
    Harness h;
    h.backend->add(ModelRole::planner_chat, "Decompose", "I cannot help with that.", 3);
    EXPECT_THROW(Planner(h.gateway).decompose(h.question, h.log), PlanningError);
    EXPECT_EQ(h.log.count_tag("planner.decompose"), 3u);
}

TEST(Decompose, ZeroSubtasksViolatesMinimum) {
    Harness h;
    h.backend->add(ModelRole::planner_chat, "Decompose", "[]", 3);
    EXPECT_THROW(Planner(h.gateway).decompose(h.question, h.log), PlanningError);
}

TEST(Decompose, RepromptRecoversFromTooFew) {
    Harness h;
    h.backend->add(ModelRole::planner_chat, "at least 3 are required", numbered(3));
    h.backend->add(ModelRole::planner_chat, "Decompose", numbered(2));
    EXPECT_EQ(Planner(h.gateway).decompose(h.question, h.log).size(), 3u);
}

TEST(NextAction, ScriptedSkaDecision) {
    Harness h;
    Subtask s{"S1", "Trade", "d", SubtaskStatus::researching, 1};
    h.backend->add(ModelRole::planner_chat, "Current subtask S1", "CALL ska: regional art-trade volumes");
    auto call = Planner(h.gateway).next_action(researching(s, h.question), h.log);
    EXPECT_EQ(call.kind, ToolKind::ska);
    EXPECT_EQ(call.query, "regional art-trade volumes");
    EXPECT_EQ(call.subtask_id, "S1");
}

TEST(NextAction, BudgetExhaustedForcesWriteWithoutModelCall) {
    Harness h;
    Subtask s{"S1", "Trade", "d", SubtaskStatus::researching, 1};
    PlannerOptions o;
    o.max_tool_calls_per_subtask = 1;
    auto call = Planner(h.gateway, o).next_action(researching(s, h.question, 1), h.log);
    EXPECT_EQ(call.kind, ToolKind::write_subtask);
    EXPECT_TRUE(call.forced);
    EXPECT_EQ(h.log.size(), 0u);
}

TEST(NextAction, DoneAfterBothAnalyzersIsWriteSubtask) {
    Harness h;
    Subtask s{"S1", "Trade", "d", SubtaskStatus::researching, 1};
    h.backend->add(ModelRole::planner_chat, "Current subtask S1", "done");
    EXPECT_EQ(Planner(h.gateway).next_action(researching(s, h.question, 2), h.log).kind, ToolKind::write_subtask);
}

TEST(NextAction, UnknownToolTwiceIsPlanningError) {
    Harness h;
    Subtask s{"S1", "Trade", "d", SubtaskStatus::researching, 1};
    h.backend->add(ModelRole::planner_chat, "Current subtask S1", "CALL browse: art", 2);
    EXPECT_THROW(Planner(h.gateway).next_action(researching(s, h.question), h.log), PlanningError);
    EXPECT_EQ(h.log.count_tag("planner.next"), 2u);
}

TEST(NextAction, WriteBeforeAnyAnalyzerCallIsCorrected) {
    Harness h;
    Subtask s{"S1", "Trade", "d", SubtaskStatus::researching, 1};
    h.backend->add(ModelRole::planner_chat, "needs at least 1 analyzer call", "CALL uka: art fairs");
    h.backend->add(ModelRole::planner_chat, "Current subtask S1", "CALL write_subtask: now");
    EXPECT_EQ(Planner(h.gateway).next_action(researching(s, h.question), h.log).kind, ToolKind::uka);
}

TEST(NextAction, PendingSubtaskRejected) {
    Harness h;
    Subtask s{"S1", "Trade", "d", SubtaskStatus::pending, 1};
    EXPECT_THROW(Planner(h.gateway).next_action(researching(s, h.question), h.log), PlanningError);
}

TEST(History, CappedAtTokenBudgetNewestFirst) {
    std::vector<WrittenSummary> written;
    for (int i = 1; i <= 5; ++i)
        written.push_back({fmt::format("S{}", i), "T", "## T\n\n![f](assets/x.png)\n\n" + std::string(400, 'a' + static_cast<char>(i))});
    const auto h = build_history(written, 250);
    EXPECT_LE(text::estimate_tokens(h), 250u + 20u);
    EXPECT_NE(h.find("S5 T:"), std::string::npos);
    EXPECT_EQ(h.find("S1 T:"), std::string::npos);
    EXPECT_NE(h.find("earlier subtask(s) omitted"), std::string::npos);
    EXPECT_EQ(h.find("assets/x.png"), std::string::npos);
    EXPECT_EQ(build_history(written, 100000).find("omitted"), std::string::npos);
}

TEST(Research, ScriptedTwoSubtaskRunProducesValidBundle) {
    strata::testing::E2eFixture f;
    strata::testing::TempDir out;
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f.engine(out.path()).run_research(f.question);
    EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(30));

    EXPECT_TRUE(writer::validate_bundle(result.bundle_dir).empty());
    EXPECT_GE(result.steps, 6u);
    EXPECT_EQ(result.figures_from_tables, 2u);
    const auto report = strata::testing::read_file(result.bundle_dir / "report.md");
    EXPECT_TRUE(md::references(report, "assets/M1_1.png"));
    EXPECT_TRUE(md::references(report, "assets/M3_1.png"));
    EXPECT_FALSE(fs::exists(result.bundle_dir / ".exec"));
    EXPECT_EQ(f.backend->unconsumed(), 0u);

    const auto steps = writer::read_json_file(result.bundle_dir / "trajectory.json");
    ASSERT_TRUE(steps.is_array());
    std::size_t last = 0;
    for (const auto& s : steps) {
        EXPECT_GT(s["index"].get<std::size_t>(), last);
        last = s["index"];
    }
    EXPECT_EQ(steps.back()["tool_call"]["kind"], "finish");
    const auto meta = writer::read_json_file(result.bundle_dir / "meta.json");
    EXPECT_EQ(meta["status"], "ok");
    EXPECT_EQ(meta["figures_from_tables"], 2);
    EXPECT_EQ(meta["model_roles"]["coder"]["calls"], 3);
}

TEST(Research, TrajectoryByteStableAcrossRuns) {
    strata::testing::TempDir out_a;
    strata::testing::TempDir out_b;
    std::string traj[2];
    std::string exchanges[2];
    int i = 0;
    for (const auto* out : {&out_a, &out_b}) {
        strata::testing::E2eFixture f;
        auto r = f.engine(out->path()).run_research(f.question);
        traj[i] = strata::testing::read_file(r.bundle_dir / "trajectory.json");
        exchanges[i] = llm::mask_timing(writer::read_json_file(r.bundle_dir / "exchanges.json")).dump();
        ++i;
    }
    EXPECT_EQ(traj[0], traj[1]);
    EXPECT_EQ(exchanges[0], exchanges[1]);
}

TEST(Research, AlwaysRejectedValidationAbortsWithPartialTrajectory) {
    strata::testing::E2eFixture f;
    // Same script, but the vision model never accepts the art-trade figure.
    auto script = writer::read_json_file(f.root / "script.json");
    for (auto& r : script["rules"])
        if (r["role"] == "vision") r = {{"role", "vision"}, {"contains", "figures"}, {"response", "REGENERATE: unreadable"}, {"times", 0}};
    for (auto& r : script["rules"])
        if (r["role"] == "coder" && r["contains"] == "Table: Art trade volumes by region") r["times"] = 0;
    strata::testing::TempDir out;
    auto backend = llm::ScriptedBackend::from_json(script);
    llm::Gateway gateway{llm::GatewayConfig{}, backend};
    EngineOptions options;
    options.planner.min_subtasks = 2;
    options.output_dir = out.path();
    ResearchEngine engine(gateway, f.store, f.web, f.web, *f.sandbox, options);
    try {
        engine.run_research(f.question);
        FAIL() << "expected RunAborted";
    } catch (const RunAborted& e) {
        EXPECT_NE(std::string(e.what()).find("rejected 4 times"), std::string::npos);
        const auto steps = writer::read_json_file(e.trajectory_path());
        ASSERT_EQ(steps.size(), 1u);
        EXPECT_EQ(steps[0]["status"], "aborted");
        EXPECT_EQ(steps[0]["tool_call"]["kind"], "ska");
        EXPECT_EQ(writer::read_json_file(out.path() / "q-brexit-art" / "meta.json")["status"], "aborted");
    }
}

TEST(Research, PromptsNeverMentionFutureMaterials) {
    strata::testing::E2eFixture f;
    strata::testing::TempDir out;
    auto r = f.engine(out.path()).run_research(f.question);
    const auto steps = writer::read_json_file(r.bundle_dir / "trajectory.json");
    const auto exchanges = writer::read_json_file(r.bundle_dir / "exchanges.json")["exchanges"];
    for (const auto& step : steps) {
        for (const auto& id : step["exchange_ids"]) {
            const auto& ex = exchanges[id.get<std::size_t>() - 1];
            if (ex["role"] != "planner_chat" || ex["tag"] != "planner.next") continue;
            const auto prompt = ex["prompt"].dump();
            for (const auto& later : steps) {
                if (later["index"] < step["index"]) continue;
                for (const auto& mid : later["material_ids"])
                    EXPECT_EQ(prompt.find("[" + mid.get<std::string>() + "]"), std::string::npos);
            }
        }
    }
}

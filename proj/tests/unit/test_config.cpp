#include <gtest/gtest.h>

#include "strata/common/errors.hpp"
#include "strata/config/config.hpp"
#include "test_util.hpp"

using namespace strata;
using namespace strata::config;
using strata::testing::TempDir;
using strata::testing::write_file;

namespace {

EnvFn fake_env(std::map<std::string, std::string> vars) {
    return [vars](const std::string& name) -> std::optional<std::string> {
        auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

std::vector<std::string> diagnostics_of(std::string_view text, bool offline = false, const EnvFn& env = fake_env({})) {
    try {
        parse_config(text, "/cfg/strata.toml", offline, env);
    } catch (const ConfigError& e) {
        return e.diagnostics();
    }
    return {};
}

bool mentions(const std::vector<std::string>& diags, const std::string& needle) {
    for (const auto& d : diags)
        if (d.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Toml, ParsesScalarsArraysAndSections) {
    std::vector<std::string> diags;
    auto t = parse_toml(R"(
top = 1
[a.b]
s = "x\ty"   # trailing comment
lit = 'C:\path'
n = -3_000
f = 0.25
yes = true
arr = ["p", "q",
       "r"]
)",
                        "t.toml", fake_env({}), diags);
    ASSERT_TRUE(diags.empty()) << diags.front();
    EXPECT_EQ(t.at("top").value, 1);
    EXPECT_EQ(t.at("a.b.s").value, "x\ty");
    EXPECT_EQ(t.at("a.b.lit").value, "C:\\path");
    EXPECT_EQ(t.at("a.b.n").value, -3000);
    EXPECT_DOUBLE_EQ(t.at("a.b.f").value.get<double>(), 0.25);
    EXPECT_EQ(t.at("a.b.yes").value, true);
    EXPECT_EQ(t.at("a.b.arr").value, nlohmann::json({"p", "q", "r"}));
    EXPECT_EQ(t.at("a.b.arr").line, 9);
}

TEST(Toml, InterpolatesEnvironment) {
    std::vector<std::string> diags, unset;
    auto t = parse_toml("k = \"Bearer ${TOKEN}\"\nm = \"${NOPE}x\"\nesc = \"\\${TOKEN}\"\n", "t", fake_env({{"TOKEN", "abc"}}), diags, &unset);
    EXPECT_EQ(t.at("k").value, "Bearer abc");
    EXPECT_EQ(t.at("m").value, "x");
    EXPECT_EQ(t.at("esc").value, "${TOKEN}");
    ASSERT_EQ(unset.size(), 1u);
    EXPECT_EQ(unset[0], "m: NOPE");
}

TEST(Toml, SyntaxErrorsCarryLineNumbers) {
    std::vector<std::string> diags;
    parse_toml("ok = 1\nbroken\nbare = word\nok = 2\n[bad section\n", "c.toml", fake_env({}), diags);
    ASSERT_EQ(diags.size(), 4u);
    EXPECT_EQ(diags[0], "c.toml:2: expected key = value");
    EXPECT_NE(diags[1].find("c.toml:3: bare"), std::string::npos);
    EXPECT_NE(diags[2].find("duplicate key ok"), std::string::npos);
    EXPECT_NE(diags[3].find("c.toml:5"), std::string::npos);
}

TEST(Config, DefaultsAndRelativePaths) {
    auto c = parse_config("[store]\ntables = \"data/tables\"\n[planner]\nmax_subtasks = 5\n", "/cfg/strata.toml", false, fake_env({}));
    EXPECT_EQ(c.tables, std::filesystem::path("/cfg/data/tables"));
    EXPECT_EQ(c.engine.planner.max_subtasks, 5);
    EXPECT_EQ(c.engine.planner.min_subtasks, 3);
    EXPECT_EQ(c.engine.output_dir, std::filesystem::path("/cfg/out"));
    EXPECT_EQ(c.eval.judge_cache, std::filesystem::path("/cfg/.judge_cache"));
    EXPECT_DOUBLE_EQ(c.models.at(llm::ModelRole::planner_chat).settings.temperature, 0.3);
    EXPECT_DOUBLE_EQ(c.models.at(llm::ModelRole::coder).settings.temperature, 0.0);
}

TEST(Config, ReportsEveryFieldProblemAtOnce) {
    auto d = diagnostics_of(R"(
[planner]
min_subtasks = 0
max_tool_calls_per_subtask = "six"
[ska]
max_code_retries = -1
[writer]
max_refine_drop = 1.5
[models.painter]
model = "x"
[typo]
key = 1
)");
    EXPECT_TRUE(mentions(d, "planner.min_subtasks: must be >= 1 (line 3)"));
    EXPECT_TRUE(mentions(d, "planner.max_tool_calls_per_subtask: expected an integer"));
    EXPECT_TRUE(mentions(d, "ska.max_code_retries: must be >= 0"));
    EXPECT_TRUE(mentions(d, "writer.max_refine_drop: must be within"));
    EXPECT_TRUE(mentions(d, "models.painter: unknown model role"));
    EXPECT_TRUE(mentions(d, "typo.key: unknown key"));
}

TEST(Config, MinAboveMaxIsRejected) {
    EXPECT_TRUE(mentions(diagnostics_of("[planner]\nmin_subtasks = 9\nmax_subtasks = 4\n"), "planner.min_subtasks"));
}

TEST(Config, ModelDefaultsAndOverrides) {
    auto c = parse_config(R"(
[models.default]
endpoint = "https://llm.example/v1"
api_key = "${KEY}"
model = "base"
[models.coder]
model = "code-model"
temperature = 0.1
)",
                          "/cfg/s.toml", false, fake_env({{"KEY", "secret"}}));
    const auto& coder = c.models.at(llm::ModelRole::coder);
    EXPECT_EQ(coder.settings.model, "code-model");
    EXPECT_EQ(coder.settings.endpoint, "https://llm.example/v1");
    EXPECT_EQ(coder.api_key, "secret");
    EXPECT_DOUBLE_EQ(coder.settings.temperature, 0.1);
    EXPECT_EQ(c.models.at(llm::ModelRole::vision).settings.model, "base");
    EXPECT_EQ(c.to_json()["models"]["coder"]["api_key"], "<redacted>");
}

TEST(Config, UnsetSecretOnlyMattersForLiveCommands) {
    TempDir dir;
    std::filesystem::create_directories(dir / "tables");
    const std::string text = "[store]\ntables = \"tables\"\n[models.default]\nendpoint = \"https://x\"\napi_key = \"${MISSING_KEY}\"\n";
    auto live = parse_config(text, dir / "s.toml", false, fake_env({}));
    try {
        require_for_ingest(live);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e.diagnostics(), "models.embedder.api_key: environment variable MISSING_KEY is not set"));
    }
    auto offline = parse_config(text + "[offline]\nscript = \"script.json\"\n", dir / "s.toml", true, fake_env({}));
    write_file(dir / "script.json", "{}");
    EXPECT_NO_THROW(require_for_ingest(offline));
}

TEST(Config, RunNeedsTablesAndOfflineInputs) {
    TempDir dir;
    auto c = parse_config("[store]\ntables = \"nowhere\"\n[offline]\nscript = \"s.json\"\n", dir / "s.toml", true, fake_env({}));
    try {
        require_for_run(c);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e.diagnostics(), "store.tables:"));
        EXPECT_TRUE(mentions(e.diagnostics(), "offline.script:"));
        EXPECT_TRUE(mentions(e.diagnostics(), "offline.sandbox: required"));
    }
}

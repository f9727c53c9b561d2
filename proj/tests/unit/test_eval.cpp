#include <gtest/gtest.h>

#include <random>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>

#include "strata/common/errors.hpp"
#include "strata/eval/criteria.hpp"
#include "strata/eval/judge.hpp"
#include "strata/eval/metrics.hpp"
#include "strata/eval/pdf.hpp"
#include "strata/llm/scripted_backend.hpp"
#include "test_util.hpp"

using namespace strata;
using namespace strata::eval;
using llm::ModelRole;
using strata::testing::TempDir;
using strata::testing::write_file;

namespace {

struct Harness {
    std::shared_ptr<llm::ScriptedBackend> backend = std::make_shared<llm::ScriptedBackend>();
    llm::Gateway gateway{llm::GatewayConfig{}, backend};
    llm::ExchangeLog log;
    Judge judge{gateway, log};
};

CriterionSet two_by_two() {
    CriterionSet s;
    s.dimensions = {{"Comprehensiveness", 0.5, {{"breadth-a", 0.7}, {"breadth-b", 0.3}}},
                    {"Depth", 0.5, {{"depth-a", 0.7}, {"depth-b", 0.3}}}};
    return s;
}

std::string pair_json(double g, double r) { return fmt::format("{{\"report_1\": {}, \"report_2\": {}}}", g, r); }

void solid_png(const std::filesystem::path& p, cv::Scalar bgr, int w = 200, int h = 120) {
    std::filesystem::create_directories(p.parent_path());
    cv::imwrite(p.string(), cv::Mat(h, w, CV_8UC3, bgr));
}

}  // namespace

TEST(Criteria, DefaultSetIsValid) {
    auto s = default_criteria();
    EXPECT_NO_THROW(validate(s));
    ASSERT_EQ(s.dimensions.size(), 4u);
    for (const auto& d : s.dimensions) EXPECT_EQ(d.criteria.size(), 5u);
}

TEST(Criteria, RejectsBadWeights) {
    auto s = two_by_two();
    s.dimensions[0].criteria[0].weight = 0.8;
    EXPECT_THROW(validate(s), ValidationError);
    s = two_by_two();
    s.dimensions[0].weight = 0.6;
    s.dimensions[1].weight = 0.4;
    EXPECT_THROW(validate(s), ValidationError);
    s = two_by_two();
    s.dimensions[0].name = "Instruction-Following";
    EXPECT_THROW(validate(s), ValidationError);
}

TEST(Criteria, JsonFillsOmittedWeights) {
    auto s = criteria_from_json(nlohmann::json::parse(
        R"({"dimensions": [{"name": "Depth", "criteria": ["a", "b", "c", "d"]}, {"name": "Coherence", "criteria": [{"text": "x"}]}]})"));
    EXPECT_DOUBLE_EQ(s.dimensions[0].criteria[2].weight, 0.25);
    EXPECT_DOUBLE_EQ(s.dimensions[1].weight, 0.5);
    EXPECT_NO_THROW(validate(s));
}

TEST(Race, SixtyFortyGivesPointSix) {
    Harness h;
    auto set = default_criteria();
    set.score_max = 100;
    h.backend->add(ModelRole::judge_text, "Criterion:", pair_json(60, 40), 0);
    auto sheet = h.judge.race_score("generated", "reference", set, "q");
    EXPECT_NEAR(sheet.overall, 0.6, 1e-12);
    EXPECT_EQ(h.log.count(ModelRole::judge_text), 20u);
}

TEST(Race, SymmetricJudgeGivesHalf) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Criterion:", pair_json(7, 7), 0);
    EXPECT_DOUBLE_EQ(h.judge.race_score("same", "same", default_criteria()).overall, 0.5);
}

TEST(Race, TwoByTwoWeightedSums) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Criterion: breadth-a", pair_json(8, 6))
        .add(ModelRole::judge_text, "Criterion: breadth-b", pair_json(5, 7))
        .add(ModelRole::judge_text, "Criterion: depth-a", pair_json(9, 4))
        .add(ModelRole::judge_text, "Criterion: depth-b", pair_json(3, 3));
    auto sheet = h.judge.race_score("g", "r", two_by_two());
    // spreadsheet: gen dims 7.1 and 7.2, ref dims 6.3 and 3.7
    EXPECT_NEAR(sheet.dimensions[0].gen, 7.1, 1e-9);
    EXPECT_NEAR(sheet.dimensions[0].ref, 6.3, 1e-9);
    EXPECT_NEAR(sheet.dimensions[1].gen, 7.2, 1e-9);
    EXPECT_NEAR(sheet.dimensions[1].ref, 3.7, 1e-9);
    EXPECT_NEAR(sheet.gen_intermediate, 7.15, 1e-9);
    EXPECT_NEAR(sheet.ref_intermediate, 5.0, 1e-9);
    EXPECT_NEAR(sheet.overall, 7.15 / 12.15, 1e-9);
}

TEST(Race, UnparseableTwiceBecomesMissingAndRenormalizes) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Criterion: breadth-a", "eight-ish", 2)
        .add(ModelRole::judge_text, "Criterion: breadth-b", pair_json(5, 7))
        .add(ModelRole::judge_text, "Criterion: depth-a", pair_json(9, 4))
        .add(ModelRole::judge_text, "Criterion: depth-b", pair_json(3, 3));
    auto sheet = h.judge.race_score("g", "r", two_by_two());
    EXPECT_EQ(h.log.count_tag("eval.race.fix"), 1u);
    EXPECT_FALSE(sheet.criteria[0].scores.has_value());
    EXPECT_EQ(sheet.dimensions[0].missing, 1);
    double total = 0;
    for (const auto& c : sheet.criteria) total += c.weight * 0.5;  // dimension weights are equal here
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_NEAR(sheet.dimensions[0].gen, 5.0, 1e-12);
    EXPECT_EQ(h.backend->unconsumed(), 0u);
}

TEST(Race, OutOfScaleIsReprompted) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "could not be used", pair_json(9, 8), 0)
        .add(ModelRole::judge_text, "Criterion:", pair_json(90, 80), 0);
    auto pairs = h.judge.race_pairs("g", "r", two_by_two());
    ASSERT_TRUE(pairs[0].has_value());
    EXPECT_DOUBLE_EQ(pairs[0]->first, 9);
}

TEST(Race, EmptyReportIsAnError) {
    Harness h;
    EXPECT_THROW(h.judge.race_score("  ", "r", two_by_two()), EvaluationError);
}

TEST(Metrics, AntisymmetryAndPurity) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 10);
    auto set = default_criteria();
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::optional<ScorePair>> fwd, rev;
        for (int i = 0; i < 20; ++i) {
            const double a = u(rng), b = u(rng);
            fwd.push_back(ScorePair{a, b});
            rev.push_back(ScorePair{b, a});
        }
        auto s1 = aggregate(set, fwd);
        EXPECT_NEAR(s1.overall + aggregate(set, rev).overall, 1.0, 1e-12);
        EXPECT_EQ(to_json(s1).dump(), to_json(aggregate(set, fwd)).dump());
    }
    EXPECT_DOUBLE_EQ(relative_overall(0, 0), 0.5);
}

TEST(MainAlignment, RescalesAndAverages) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Main conclusion: seven", "SCORE: 7")
        .add(ModelRole::judge_text, "Main conclusion: zero", "SCORE: 0")
        .add(ModelRole::judge_text, "Main conclusion: eight", "SCORE: 8")
        .add(ModelRole::judge_text, "Main conclusion: nine", "9");
    EXPECT_DOUBLE_EQ(h.judge.main_alignment("r", "seven", "q"), 70.0);
    EXPECT_DOUBLE_EQ(h.judge.main_alignment("r", "zero", "q"), 0.0);
    const double m = mean({70.0, h.judge.main_alignment("r", "eight", "q"), h.judge.main_alignment("r", "nine", "q")});
    EXPECT_DOUBLE_EQ(m, 80.0);
}

TEST(MainAlignment, OutOfRangeRepromptsThenClamps) {
    Harness h;
    h.backend->add(ModelRole::judge_text, "Main conclusion:", "SCORE: 12", 2);
    EXPECT_DOUBLE_EQ(h.judge.main_alignment("r", "m", "q"), 100.0);
    EXPECT_EQ(h.log.count_tag("eval.main.fix"), 1u);
    bool warned = false;
    for (const auto& e : h.log.events()) warned |= e.level == "warn" && e.message.find("clamped") != std::string::npos;
    EXPECT_TRUE(warned);

    Harness h2;
    h2.backend->add(ModelRole::judge_text, "single integer", "SCORE: 6").add(ModelRole::judge_text, "Main conclusion:", "SCORE: 11");
    EXPECT_DOUBLE_EQ(h2.judge.main_alignment("r", "m", "q"), 60.0);
}

TEST(KeyCoverage, Ratios) {
    Harness h;
    std::vector<KeyPoint> p3{{"a", "T1"}, {"b", "T1"}, {"c", "T2"}};
    h.backend->add(ModelRole::judge_text, "covers it", "[1, 0, 1]");
    EXPECT_NEAR(h.judge.key_coverage("r", p3, "q").score, 2.0 / 3.0, 1e-9);

    std::vector<KeyPoint> big(261, KeyPoint{"k", "T"});
    std::vector<int> ones(261, 0);
    for (int i = 0; i < 130; ++i) ones[static_cast<std::size_t>(i * 2)] = 1;
    h.backend->add(ModelRole::judge_text, "covers it", nlohmann::json(ones).dump());
    EXPECT_NEAR(h.judge.key_coverage("r", big, "q").score, 130.0 / 261.0, 1e-12);

    h.backend->add(ModelRole::judge_text, "covers it", "[true, true, true]");
    EXPECT_DOUBLE_EQ(h.judge.key_coverage("r", p3, "q").score, 1.0);
}

TEST(KeyCoverage, LengthMismatchRepromptsThenFails) {
    Harness h;
    std::vector<KeyPoint> p3{{"a", ""}, {"b", ""}, {"c", ""}};
    h.backend->add(ModelRole::judge_text, "exactly 3 values", "[0, 1, 1]").add(ModelRole::judge_text, "covers it", "[1, 1]");
    auto r = h.judge.key_coverage("r", p3, "q");
    EXPECT_EQ(r.indicators, (std::vector<int>{0, 1, 1}));

    Harness h2;
    h2.backend->add(ModelRole::judge_text, "covers it", "[1, 1]", 2);
    EXPECT_THROW(h2.judge.key_coverage("r", p3, "q"), EvaluationError);
}

TEST(KeySupportiveness, ConjunctionOracle) {
    EXPECT_NEAR(supportiveness_score({1, 1, 0}, {1, 0, 1}), 1.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(supportiveness_score({1, 1, 1}, {0, 0, 0}), 0.0);
    EXPECT_THROW(supportiveness_score({1}, {1, 0}), EvaluationError);

    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> cov(8), use(8);
        unsigned both = 0;
        for (std::size_t i = 0; i < 8; ++i) {
            cov[i] = static_cast<int>(rng() & 1U);
            use[i] = static_cast<int>(rng() & 1U);
        }
        const unsigned mask_c = [&] { unsigned m = 0; for (std::size_t i = 0; i < 8; ++i) m |= static_cast<unsigned>(cov[i]) << i; return m; }();
        const unsigned mask_u = [&] { unsigned m = 0; for (std::size_t i = 0; i < 8; ++i) m |= static_cast<unsigned>(use[i]) << i; return m; }();
        both = static_cast<unsigned>(__builtin_popcount(mask_c & mask_u));
        EXPECT_NEAR(supportiveness_score(cov, use), both / 8.0, 1e-12);
        EXPECT_LE(supportiveness_score(cov, use), coverage_score(cov));
    }
}

TEST(KeySupportiveness, JudgedAgainstTables) {
    Harness h;
    std::vector<KeyPoint> pts{{"sales fell", "T1"}, {"visas rose", "T2"}, {"fairs moved", "T1"}};
    h.backend->add(ModelRole::judge_text, "evidence drawn from the named table", "[1, 0, 1]");
    auto r = h.judge.key_supportiveness("r", pts, {1, 1, 0}, {{"T1", "Art trade volumes"}}, "q");
    EXPECT_NEAR(r.score, 1.0 / 3.0, 1e-12);
    const auto prompt = h.log.exchanges().back().prompt.back().text;
    EXPECT_NE(prompt.find("[table T1: Art trade volumes]"), std::string::npos);
    EXPECT_NE(prompt.find("[table T2]"), std::string::npos);
}

TEST(Points, LoaderChecksInvariants) {
    auto ok = points_from_json(nlohmann::json::parse(
        R"({"question_id": "q1", "question": "Q", "main_conclusion": "M", "key_points": [{"text": "p", "table_id": "T1"}], "ground_truth_tables": ["T1"]})"));
    EXPECT_EQ(ok.key_points.size(), 1u);
    EXPECT_THROW(points_from_json(nlohmann::json::parse(
                     R"({"main_conclusion": "M", "key_points": [{"text": "p", "table_id": "T9"}], "ground_truth_tables": ["T1"]})")),
                 ValidationError);
    EXPECT_THROW(points_from_json(nlohmann::json::parse(R"({"main_conclusion": "M", "key_points": []})")), ValidationError);
}

TEST(Parsers, VerdictShapes) {
    EXPECT_EQ(parse_preference("PREFER: 2"), 2);
    EXPECT_EQ(parse_preference("I prefer report 1."), 1);
    EXPECT_FALSE(parse_preference("both are fine").has_value());
    EXPECT_EQ(parse_score("**SCORE**: 4"), 4);
    EXPECT_FALSE(parse_score("SCORE: 7.5").has_value());
    EXPECT_TRUE(parse_score_pair("```json\n[3, 4]\n```").has_value());
    EXPECT_FALSE(parse_indicators("[1, 2]").has_value());
    EXPECT_EQ(parse_indicators("{\"indicators\": [0, 1]}"), (std::vector<int>{0, 1}));
}

namespace {

// Vision judge double that looks at which agent's pages come first.
class PageJudge : public llm::Backend {
public:
    // Questions where the judge prefers agent A's report, wherever it is shown.
    std::set<std::string> a_wins;
    bool position_biased = false;

    llm::ModelResponse complete(const llm::ModelRequest& req) override {
        const auto& imgs = req.messages.back().images;
        if (position_biased) return {"PREFER: 1", 0, 0};
        const std::filesystem::path first(imgs.front().path);
        const auto agent = first.parent_path().parent_path().filename().string();
        const auto qid = first.parent_path().filename().string();
        const bool a_first = agent == "A";
        const bool prefer_a = a_wins.count(qid) > 0;
        return {prefer_a == a_first ? "PREFER: 1" : "PREFER: 2", 0, 0};
    }
    std::vector<std::vector<double>> embed(const std::string&, const std::vector<std::string>&) override { return {}; }
};

std::vector<ComparedReport> pages_for(const TempDir& dir, const std::string& agent, int n) {
    std::vector<ComparedReport> out;
    for (int i = 0; i < n; ++i) {
        const auto qid = fmt::format("q{}", i + 1);
        const auto p = dir.path() / agent / qid / "page_001.png";
        if (!std::filesystem::exists(p)) solid_png(p, cv::Scalar(255, 255, 255), 20, 28);
        out.push_back({qid, i % 2 ? "finance" : "art", {p}, {}});
    }
    return out;
}

}  // namespace

TEST(VisionWinRate, ThreeOfFour) {
    TempDir dir;
    auto backend = std::make_shared<PageJudge>();
    backend->a_wins = {"q1", "q2", "q4"};
    llm::Gateway gw{llm::GatewayConfig{}, backend};
    llm::ExchangeLog log;
    Judge judge{gw, log};
    auto r = judge.vision_win_rate(pages_for(dir, "A", 4), pages_for(dir, "B", 4), "A", "B", 17);
    EXPECT_DOUBLE_EQ(r.rate, 0.75);
    EXPECT_DOUBLE_EQ(r.per_domain.at("art"), 0.5);
    EXPECT_DOUBLE_EQ(r.per_domain.at("finance"), 1.0);
    EXPECT_EQ(log.count(ModelRole::judge_vision), 4u);
    bool seed_logged = false;
    for (const auto& e : log.events()) seed_logged |= e.message.find("seed 17") != std::string::npos;
    EXPECT_TRUE(seed_logged);
}

TEST(VisionWinRate, RandomizedOrderIsSymmetricOverSeeds) {
    TempDir dir;
    auto a = pages_for(dir, "A", 6);
    auto b = pages_for(dir, "B", 6);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto backend = std::make_shared<PageJudge>();
        backend->a_wins = {"q2", "q3", "q5"};
        llm::Gateway gw{llm::GatewayConfig{}, backend};
        llm::ExchangeLog log;
        Judge judge{gw, log};
        const double ab = judge.vision_win_rate(a, b, "A", "B", seed).rate;
        // with roles exchanged, the content judge prefers A's reports in the other questions
        backend->a_wins = {"q1", "q4", "q6"};
        const double ba = judge.vision_win_rate(b, a, "B", "A", seed).rate;
        EXPECT_NEAR(ab + ba, 1.0, 1e-12) << "seed " << seed;
        EXPECT_DOUBLE_EQ(ab, 0.5);
    }
}

TEST(VisionWinRate, PositionBiasIsSpreadBySeededOrder) {
    TempDir dir;
    auto a = pages_for(dir, "A", 8);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto backend = std::make_shared<PageJudge>();
        backend->position_biased = true;
        llm::Gateway gw{llm::GatewayConfig{}, backend};
        llm::ExchangeLog log;
        Judge judge{gw, log};
        auto r = judge.vision_win_rate(a, a, "A", "A", seed);
        std::mt19937_64 oracle(seed);
        int shown_first = 0;
        for (int i = 0; i < 8; ++i) shown_first += (oracle() & 1U) ? 0 : 1;
        EXPECT_DOUBLE_EQ(r.rate, shown_first / 8.0);
    }
}

TEST(VisionWinRate, CompileFailureIsExcluded) {
    TempDir dir;
    auto backend = std::make_shared<PageJudge>();
    backend->a_wins = {"q1", "q2", "q3"};
    llm::Gateway gw{llm::GatewayConfig{}, backend};
    llm::ExchangeLog log;
    Judge judge{gw, log};
    auto a = pages_for(dir, "A", 4);
    auto b = pages_for(dir, "B", 4);
    b[3].pages.clear();
    b[3].compile_error = "corrupt or missing asset: assets/M1_1.png";
    auto r = judge.vision_win_rate(a, b, "A", "B", 3);
    EXPECT_EQ(r.records.size(), 3u);
    ASSERT_EQ(r.excluded.size(), 1u);
    EXPECT_DOUBLE_EQ(r.rate, 1.0);
    EXPECT_THROW(judge.vision_win_rate(a, pages_for(dir, "B", 3), "A", "B", 3), ValidationError);
}

namespace {

std::filesystem::path figure_bundle(const TempDir& dir, const std::string& name = "bundle") {
    const auto b = dir.path() / name;
    solid_png(b / "assets/M1_1.png", cv::Scalar(0, 0, 255), 400, 300);   // red
    solid_png(b / "assets/M3_1.png", cv::Scalar(255, 0, 0), 300, 300);   // blue
    write_file(b / "meta.json", R"({"question": "How did Brexit affect the UK art market?"})");
    write_file(b / "report.md",
               "# How did Brexit affect the UK art market?\n\n## Trade\n\nImports fell sharply after 2020.\n\n"
               "![Art trade volumes](assets/M1_1.png)\n\n| Year | Imports | Exports |\n|---|---:|---:|\n| 2019 | 120 | 90 |\n"
               "| 2021 | 80 | 70 |\n\n## Mobility\n\n- visas\n- touring costs\n\n![Museum visits](assets/M3_1.png)\n");
    return b;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(CompileReport, EmbedsFiguresAndRulesTables) {
    TempDir dir;
    auto layout = layout_report(figure_bundle(dir));
    ASSERT_EQ(layout.images.size(), 2u);
    const auto pdf = render_pdf(layout);
    EXPECT_EQ(count_of(pdf, "/Subtype /Image"), 2u);
    EXPECT_EQ(pdf.rfind("%%EOF\n"), pdf.size() - 6);

    // Golden checks on the raster: the figure rectangles carry the asset colours
    // and each table row boundary is a dark rule.
    auto raster = rasterize_page(layout, 0, 1.0);
    auto px = [&](double x, double y) {
        const auto off = (static_cast<std::size_t>(std::lround(y)) * static_cast<std::size_t>(raster.width) + static_cast<std::size_t>(std::lround(x))) * 3;
        return std::array<int, 3>{raster.rgb[off], raster.rgb[off + 1], raster.rgb[off + 2]};
    };
    std::vector<ImageOp> figs;
    std::vector<LineOp> rules;
    for (const auto& page : layout.pages)
        for (const auto& op : page.ops) {
            if (auto* im = std::get_if<ImageOp>(&op)) figs.push_back(*im);
            if (auto* l = std::get_if<LineOp>(&op); l && l->y1 == l->y2 && l->x1 == kMargin && &page == &layout.pages[0]) rules.push_back(*l);
        }
    ASSERT_EQ(figs.size(), 2u);
    ASSERT_EQ(layout.pages.size(), 1u);
    EXPECT_EQ(px(figs[0].x + figs[0].w / 2, figs[0].y + figs[0].h / 2), (std::array<int, 3>{0, 0, 255}));
    EXPECT_EQ(px(figs[1].x + figs[1].w / 2, figs[1].y + figs[1].h / 2), (std::array<int, 3>{255, 0, 0}));
    // title rule plus four table rules (top, under header, two rows)
    EXPECT_GE(rules.size(), 5u);
    for (const auto& r : rules) EXPECT_EQ(px(kMargin + 3, r.y1), (std::array<int, 3>{0, 0, 0}));
}

TEST(CompileReport, Deterministic) {
    TempDir dir;
    const auto b = figure_bundle(dir);
    auto one = compile_report(b, dir.path() / "out1");
    auto two = compile_report(b, dir.path() / "out2");
    EXPECT_EQ(one.page_count(), two.page_count());
    EXPECT_EQ(one.raster_hashes, two.raster_hashes);
    EXPECT_EQ(strata::testing::read_file(one.pdf), strata::testing::read_file(two.pdf));
    ASSERT_EQ(one.page_images.size(), one.page_count());
    EXPECT_FALSE(cv::imread(one.page_images[0].string()).empty());
}

TEST(CompileReport, EmptyBodyIsTitleOnlyPage) {
    TempDir dir;
    write_file(dir / "b/report.md", "# Only a title\n");
    auto layout = layout_report(dir / "b");
    ASSERT_EQ(layout.pages.size(), 1u);
    std::size_t texts = 0;
    for (const auto& op : layout.pages[0].ops)
        if (auto* t = std::get_if<TextOp>(&op)) {
            ++texts;
            EXPECT_EQ(t->text, "Only a title");
        }
    EXPECT_EQ(texts, 1u);
}

TEST(CompileReport, ExternalFigureBecomesPlaceholder) {
    TempDir dir;
    const std::string url = "https://unreachable.invalid/chart.png";
    write_file(dir / "b/report.md", "# T\n\nSee below.\n\n![Remote chart](" + url + ")\n");
    auto layout = layout_report(dir / "b");
    EXPECT_TRUE(layout.images.empty());
    bool box = false, caption = false;
    for (const auto& op : layout.pages[0].ops) {
        box |= std::holds_alternative<RectOp>(op);
        if (auto* t = std::get_if<TextOp>(&op)) caption |= t->text == url;
    }
    EXPECT_TRUE(box);
    EXPECT_TRUE(caption);
}

TEST(CompileReport, CorruptAssetIsNamed) {
    TempDir dir;
    write_file(dir / "b/assets/M2_1.png", "garbage");
    write_file(dir / "b/report.md", "# T\n\n![x](assets/M2_1.png)\n");
    try {
        compile_report(dir / "b", dir / "out");
        FAIL() << "expected CompileError";
    } catch (const CompileError& e) {
        EXPECT_NE(std::string(e.what()).find("assets/M2_1.png"), std::string::npos);
    }
}

TEST(CompileReport, LongReportPaginates) {
    TempDir dir;
    std::string md = "# Long\n\n";
    for (int i = 0; i < 120; ++i) md += fmt::format("Paragraph {} with (parentheses) and a backslash \\ to escape.\n\n", i);
    write_file(dir / "b/report.md", md);
    auto c = compile_report(dir / "b", dir / "out");
    EXPECT_GT(c.page_count(), 1u);
    EXPECT_EQ(c.page_images.size(), c.page_count());
    const auto pdf = strata::testing::read_file(c.pdf);
    EXPECT_NE(pdf.find(fmt::format("/Count {}", c.page_count())), std::string::npos);
}

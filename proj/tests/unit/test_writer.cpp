#include <gtest/gtest.h>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/llm/scripted_backend.hpp"
#include "strata/writer/markdown.hpp"
#include "strata/writer/writer.hpp"

using namespace strata;
using namespace strata::writer;
using llm::ModelRole;

namespace {

SupportingMaterial figure_material(std::string id, std::vector<std::string> assets, std::string insight) {
    SupportingMaterial m;
    m.id = std::move(id);
    m.kind = MaterialKind::structured;
    m.subtask_id = "S1";
    m.query = "regional art-trade volumes";
    m.table_id = "T1";
    m.table_title = "Art trade volumes";
    m.assets = std::move(assets);
    m.insight = std::move(insight);
    m.verdict = "valid";
    return m;
}

SupportingMaterial web_material(std::string id, std::string url) {
    SupportingMaterial m;
    m.id = std::move(id);
    m.kind = MaterialKind::text;
    m.subtask_id = "S1";
    m.query = "Brexit artist mobility";
    m.summary = "Touring costs rose after 2021.";
    m.cited_urls = {std::move(url)};
    return m;
}

struct Harness {
    std::shared_ptr<llm::ScriptedBackend> backend = std::make_shared<llm::ScriptedBackend>();
    llm::Gateway gateway{llm::GatewayConfig{}, backend};
    llm::ExchangeLog log;
    store::ChunkStore chunks;
    ReportWriter writer{gateway};
    Subtask subtask{"S1", "Institutional changes", "Brexit-related regulatory shifts", SubtaskStatus::researching, 1};

    bool logged(const std::string& scope, const std::string& needle) const {
        for (const auto& e : log.events())
            if (e.scope == scope && e.message.find(needle) != std::string::npos) return true;
        return false;
    }
};

const char* kOutline =
    R"({"sections":[{"heading":"Trade","materials":["M1","M2"],"slots":["assets/M1_1.png"]}],"dropped":[]})";

SubtaskResult result_with(std::string id, std::string body) {
    SubtaskResult r;
    r.subtask_id = id;
    r.title = "Part " + id;
    r.body = std::move(body);
    return r;
}

}  // namespace

TEST(Markdown, ImageRefsSkipFencedCode) {
    const std::string s = "a ![x [1]](assets/a.png \"t\") b\n```\n![no](assets/z.png)\n```\n![y](<https://e.x/y.png>)";
    EXPECT_EQ(md::image_targets(s), (std::vector<std::string>{"assets/a.png", "https://e.x/y.png"}));
}

TEST(Markdown, DedupeKeepsFirstParagraph) {
    const std::string para = "Touring costs for UK artists in the EU rose sharply after 2021.";
    std::vector<std::string> dropped;
    auto out = md::dedupe_paragraphs("# T\n\n" + para + "\n\n## B\n\n" + para + "\n", &dropped);
    EXPECT_EQ(out, "# T\n\n" + para + "\n\n## B\n");
    EXPECT_EQ(dropped.size(), 1u);
}

TEST(Markdown, InsertAfterHeadingLandsBelowFirstParagraph) {
    auto out = md::insert_after_heading("## A\n\ntext a\n\n### Trade\n\ntrade text\n\nmore\n", "trade", "![f](x.png)");
    EXPECT_EQ(out, "## A\n\ntext a\n\n### Trade\n\ntrade text\n\n![f](x.png)\n\nmore\n");
    EXPECT_EQ(md::insert_after_heading("text\n", "absent", "![f](x.png)"), "text\n\n![f](x.png)\n");
}

TEST(Markdown, DemoteHeadings) {
    EXPECT_EQ(md::demote_headings("# A\n#nope\n```\n# code\n```\n", 1), "## A\n#nope\n```\n# code\n```\n");
}

TEST(WriteSubtask, FigureAndWebSourceBothAppear) {
    Harness h;
    h.backend->add(ModelRole::writer_chat, "Draft an outline", kOutline);
    h.backend->add(ModelRole::writer_chat, "Write the report section",
                   "## Institutional changes\n\n### Trade\n\nVolumes fell.\n\n![Trade volumes](assets/M1_1.png)\n\n"
                   "Touring costs rose (https://a.example).");
    auto r = h.writer.write_subtask(h.subtask, {figure_material("M1", {"assets/M1_1.png"}, "EU share fell"),
                                                web_material("M2", "https://a.example")},
                                    h.chunks, h.log);
    EXPECT_TRUE(md::references(r.body, "assets/M1_1.png"));
    EXPECT_EQ(r.citations, std::vector<std::string>{"https://a.example"});
    EXPECT_FALSE(r.mechanical_insertion);
    EXPECT_EQ(h.log.count_tag("writer.fill.fix"), 0u);
}

TEST(WriteSubtask, OmittedFigureRepromptedThenInsertedMechanically) {
    Harness h;
    h.backend->add(ModelRole::writer_chat, "Draft an outline", kOutline);
    h.backend->add(ModelRole::writer_chat, "omits these outline figures", "## Institutional changes\n\n### Trade\n\nStill no figure.");
    h.backend->add(ModelRole::writer_chat, "Write the report section", "## Institutional changes\n\n### Trade\n\nNo figure here.");
    auto r = h.writer.write_subtask(h.subtask, {figure_material("M1", {"assets/M1_1.png"}, "EU share fell")}, h.chunks,
                                    h.log);
    EXPECT_EQ(h.log.count_tag("writer.fill.fix"), 1u);
    EXPECT_TRUE(r.mechanical_insertion);
    EXPECT_TRUE(md::references(r.body, "assets/M1_1.png"));
    EXPECT_LT(r.body.find("Still no figure."), r.body.find("assets/M1_1.png"));
    EXPECT_TRUE(h.logged("writer.fill", "mechanically inserted assets/M1_1.png"));
}

TEST(WriteSubtask, CorrectiveRepromptCanFixTheBody) {
    Harness h;
    h.backend->add(ModelRole::writer_chat, "Draft an outline", kOutline);
    h.backend->add(ModelRole::writer_chat, "omits these outline figures", "## Institutional changes\n\n![t](assets/M1_1.png)");
    h.backend->add(ModelRole::writer_chat, "Write the report section", "## Institutional changes\n\nNo figure.");
    auto r = h.writer.write_subtask(h.subtask, {figure_material("M1", {"assets/M1_1.png"}, "x")}, h.chunks, h.log);
    EXPECT_FALSE(r.mechanical_insertion);
    EXPECT_TRUE(md::references(r.body, "assets/M1_1.png"));
}

TEST(WriteSubtask, NoSourcesOnlyStatesEvidenceGapWithoutModelCall) {
    Harness h;
    SupportingMaterial m;
    m.id = "M1";
    m.kind = MaterialKind::no_sources;
    m.query = "obscure query";
    auto r = h.writer.write_subtask(h.subtask, {m}, h.chunks, h.log);
    EXPECT_NE(r.body.find("evidence gap"), std::string::npos);
    EXPECT_TRUE(r.citations.empty());
    EXPECT_TRUE(text::extract_urls(r.body).empty());
    EXPECT_EQ(h.log.size(), 0u);
}

TEST(WriteSubtask, NoMaterialsIsWriterError) {
    Harness h;
    EXPECT_THROW(h.writer.write_subtask(h.subtask, {}, h.chunks, h.log), WriterError);
}

TEST(WriteSubtask, FabricatedFigureRemoved) {
    Harness h;
    h.backend->add(ModelRole::writer_chat, "Draft an outline", kOutline);
    h.backend->add(ModelRole::writer_chat, "Write the report section",
                   "## Institutional changes\n\n![a](assets/M1_1.png)\n\n![made up](assets/M9_1.png)");
    auto r = h.writer.write_subtask(h.subtask, {figure_material("M1", {"assets/M1_1.png"}, "x")}, h.chunks, h.log);
    EXPECT_EQ(md::image_targets(r.body), std::vector<std::string>{"assets/M1_1.png"});
    EXPECT_TRUE(h.logged("writer.fill", "assets/M9_1.png"));
}

TEST(WriteSubtask, RawChunksReachTheFillPrompt) {
    Harness h;
    h.chunks.store_chunks("https://a.example", "S1", "RAW-CHUNK-TEXT about carnets");
    h.backend->add(ModelRole::writer_chat, "Draft an outline", kOutline);
    h.backend->add(ModelRole::writer_chat, "RAW-CHUNK-TEXT", "## I\n\n![a](assets/M1_1.png)");
    EXPECT_NO_THROW(h.writer.write_subtask(h.subtask, {figure_material("M1", {"assets/M1_1.png"}, "x")}, h.chunks, h.log));
}

TEST(Outline, UnparseableTwiceFallsBackWithEverySlot) {
    Harness h;
    h.backend->add(ModelRole::writer_chat, "Draft an outline", "not json", 2);
    auto o = h.writer.outline(h.subtask, {figure_material("M1", {"assets/M1_1.png", "assets/M1_2.png"}, "x")}, h.log);
    ASSERT_EQ(o.sections.size(), 1u);
    EXPECT_EQ(o.sections[0].slots.size(), 2u);
    EXPECT_EQ(h.log.count_tag("writer.outline"), 2u);
}

TEST(Outline, MissingFigureGetsSlotAndDropNeedsReason) {
    Harness h;
    h.backend->add(ModelRole::writer_chat, "Draft an outline",
                   R"({"sections":[{"heading":"A","materials":["M1"],"slots":["assets/M1_1.png","assets/bogus.png"]}],
                       "dropped":[{"asset":"assets/M1_2.png","reason":"duplicate of figure 1"},
                                  {"asset":"assets/M1_3.png","reason":""}]})");
    auto o = h.writer.outline(
        h.subtask, {figure_material("M1", {"assets/M1_1.png", "assets/M1_2.png", "assets/M1_3.png"}, "x")}, h.log);
    EXPECT_EQ(o.sections[0].slots, (std::vector<std::string>{"assets/M1_1.png", "assets/M1_3.png"}));
    ASSERT_EQ(o.dropped.size(), 1u);
    EXPECT_EQ(o.dropped[0].asset, "assets/M1_2.png");
    EXPECT_EQ(o.dropped[0].material_id, "M1");
}

TEST(Refine, KeepingAllSixFiguresIsAccepted) {
    Harness h;
    std::vector<SubtaskResult> results;
    std::string all;
    for (int s = 1; s <= 3; ++s) {
        std::string body = fmt::format("## Part {}\n\n", s);
        for (int f = 1; f <= 2; ++f) {
            const auto ref = fmt::format("![f](assets/M{}_{}.png)", s, f);
            body += ref + "\n\n";
            all += ref + "\n\n";
        }
        results.push_back(result_with("S" + std::to_string(s), body));
    }
    h.backend->add(ModelRole::writer_chat, "Refine the draft", "# Report\n\nIntro.\n\n" + all + "## Conclusion\n\nDone.");
    auto report = h.writer.refine_report(results, "Q?", h.log);
    EXPECT_FALSE(report.fallback);
    EXPECT_EQ(md::image_targets(report.markdown).size(), 6u);
    EXPECT_TRUE(report.drops.empty());
}

TEST(Refine, DroppingFiveOfSixFallsBackToConcatenation) {
    Harness h;
    std::vector<SubtaskResult> results;
    for (int s = 1; s <= 3; ++s)
        results.push_back(result_with("S" + std::to_string(s),
                                      fmt::format("## Part {}\n\n![f](assets/M{}_1.png)\n\n![g](assets/M{}_2.png)\n", s, s, s)));
    h.backend->add(ModelRole::writer_chat, "Refine the draft", "# Report\n\n![f](assets/M1_1.png)\n", 0);
    auto report = h.writer.refine_report(results, "How did Brexit affect artists?", h.log);
    EXPECT_TRUE(report.fallback);
    EXPECT_EQ(report.refine_attempts, 2);
    EXPECT_EQ(h.log.count_tag("writer.refine.fix"), 1u);
    EXPECT_EQ(md::image_targets(report.markdown).size(), 6u);
    EXPECT_EQ(report.markdown.rfind("# How did Brexit affect artists?", 0), 0u);
    EXPECT_NE(report.markdown.find("## Conclusion"), std::string::npos);
}

TEST(Refine, HalfDroppedIsAcceptedAndLogged) {
    Harness h;
    std::vector<SubtaskResult> results{result_with("S1", "## A\n\n![a](assets/M1_1.png)\n\n![b](assets/M1_2.png)\n")};
    h.backend->add(ModelRole::writer_chat, "Refine the draft", "# R\n\n![a](assets/M1_1.png)\n");
    auto report = h.writer.refine_report(results, "Q", h.log);
    EXPECT_FALSE(report.fallback);
    ASSERT_EQ(report.drops.size(), 1u);
    EXPECT_EQ(report.drops[0].asset, "assets/M1_2.png");
    EXPECT_EQ(report.drops[0].stage, "refine");
}

TEST(Refine, DuplicateParagraphAppearsOnce) {
    Harness h;
    const std::string dup = "UK artists now need a work permit for most EU member states since 2021.";
    std::vector<SubtaskResult> results{result_with("S1", "## A\n\n" + dup + "\n"), result_with("S2", "## B\n\n" + dup + "\n")};
    h.backend->add(ModelRole::writer_chat, "Refine the draft", "# R\n\n## A\n\n" + dup + "\n\n## B\n\nOther text.\n");
    auto report = h.writer.refine_report(results, "Q", h.log);
    const auto first = report.markdown.find(dup);
    ASSERT_NE(first, std::string::npos);
    EXPECT_EQ(report.markdown.find(dup, first + 1), std::string::npos);
}

TEST(Refine, ConcatenationFallbackDedupes) {
    const std::string dup = "UK artists now need a work permit for most EU member states since 2021.";
    auto out = concatenate_report({result_with("S1", "## A\n\n" + dup), result_with("S2", "## B\n\n" + dup)}, "Q");
    const auto first = out.find(dup);
    EXPECT_EQ(out.find(dup, first + 1), std::string::npos);
}

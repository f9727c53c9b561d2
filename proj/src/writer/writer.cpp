#include "strata/writer/writer.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/writer/markdown.hpp"

namespace strata::writer {

using llm::ModelRole;

nlohmann::json to_json(const DropRecord& d) {
    return {{"asset", d.asset}, {"material_id", d.material_id}, {"stage", d.stage}, {"reason", d.reason}};
}

nlohmann::json to_json(const Outline& o) {
    nlohmann::json sections = nlohmann::json::array();
    for (const auto& s : o.sections)
        sections.push_back({{"heading", s.heading}, {"materials", s.materials}, {"slots", s.slots}});
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& d : o.dropped) dropped.push_back(to_json(d));
    return {{"subtask_id", o.subtask_id}, {"sections", sections}, {"dropped", dropped}};
}

nlohmann::json to_json(const SubtaskResult& r) {
    nlohmann::json drops = nlohmann::json::array();
    for (const auto& d : r.drops) drops.push_back(to_json(d));
    return {{"subtask_id", r.subtask_id},   {"title", r.title}, {"body", r.body}, {"citations", r.citations},
            {"drops", drops}, {"mechanical_insertion", r.mechanical_insertion}};
}

namespace {

// Figures a subtask body may reference, mapped to the owning material.
std::map<std::string, const SupportingMaterial*> figure_owners(const std::vector<SupportingMaterial>& materials) {
    std::map<std::string, const SupportingMaterial*> out;
    for (const auto& m : materials) {
        for (const auto& a : m.assets) out.emplace(a, &m);
        for (const auto& u : m.figure_urls) out.emplace(u, &m);
    }
    return out;
}

std::string describe(const SupportingMaterial& m) {
    switch (m.kind) {
        case MaterialKind::structured: {
            std::string s = fmt::format("[{}] table analysis of \"{}\" ({})\nInsight: {}\n", m.id, m.table_title,
                                        m.table_id, m.insight.empty() ? "(none)" : m.insight);
            for (const auto& a : m.assets) s += fmt::format("Figure: {}\n", a);
            for (const auto& t : m.tables) s += fmt::format("Table:\n{}\n", t);
            return s;
        }
        case MaterialKind::text: {
            std::string s = fmt::format("[{}] web summary for \"{}\"\n{}\n", m.id, m.query, m.summary);
            for (const auto& u : m.cited_urls) s += fmt::format("Source: {}\n", u);
            for (const auto& u : m.figure_urls) s += fmt::format("Web figure: {}\n", u);
            return s;
        }
        case MaterialKind::no_sources:
            return fmt::format("[{}] no usable web sources for \"{}\"\n", m.id, m.query);
    }
    return {};
}

std::string caption_for(const SupportingMaterial* m) {
    if (!m) return "Figure";
    if (!m->insight.empty()) return md::alt_text(m->insight);
    if (!m->table_title.empty()) return md::alt_text(m->table_title);
    return md::alt_text(m->query);
}

// Model output sometimes arrives wrapped in a ```markdown fence.
std::string unwrap(const std::string& reply) {
    auto t = text::trim(reply);
    if (t.rfind("```", 0) == 0) {
        if (auto body = text::extract_fenced(t, {"markdown", "md", ""}); body && t.size() - t.rfind("```") == 3)
            return text::trim(*body);
    }
    return t;
}

Outline fallback_outline(const Subtask& subtask, const std::vector<SupportingMaterial>& materials) {
    Outline o;
    o.subtask_id = subtask.id;
    OutlineSection s;
    s.heading = "Findings";
    for (const auto& m : materials) {
        s.materials.push_back(m.id);
        for (const auto& a : m.assets) s.slots.push_back(a);
    }
    o.sections.push_back(std::move(s));
    return o;
}

std::optional<Outline> parse_outline(const std::string& reply, const Subtask& subtask) {
    auto j = text::extract_json(reply);
    if (!j || !j->is_object() || !j->contains("sections") || !(*j)["sections"].is_array()) return std::nullopt;
    Outline o;
    o.subtask_id = subtask.id;
    for (const auto& s : (*j)["sections"]) {
        if (!s.is_object()) return std::nullopt;
        OutlineSection sec;
        sec.heading = text::trim(s.value("heading", ""));
        for (const auto* key : {"materials", "slots"}) {
            if (!s.contains(key)) continue;
            if (!s[key].is_array()) return std::nullopt;
            for (const auto& v : s[key])
                if (v.is_string()) (std::string_view(key) == "materials" ? sec.materials : sec.slots).push_back(v.get<std::string>());
        }
        o.sections.push_back(std::move(sec));
    }
    if (j->contains("dropped") && (*j)["dropped"].is_array()) {
        for (const auto& d : (*j)["dropped"]) {
            if (!d.is_object()) continue;
            o.dropped.push_back({d.value("asset", ""), "", "outline", text::trim(d.value("reason", ""))});
        }
    }
    return o;
}

}  // namespace

ReportWriter::ReportWriter(llm::Gateway& gateway, WriterOptions options) : gateway_(gateway), options_(options) {}

Outline ReportWriter::outline(const Subtask& subtask, const std::vector<SupportingMaterial>& materials,
                              llm::ExchangeLog& log) {
    std::string listing;
    for (const auto& m : materials) listing += describe(m) + "\n";
    const auto prompt = fmt::format(
        "Draft an outline for the report section of the subtask below. Retain the multimodal materials: place "
        "every figure in a slot of the section where it belongs. Only drop a figure if it is irrelevant, and give "
        "the reason.\nReply with JSON only: {{\"sections\": [{{\"heading\": str, \"materials\": [material ids], "
        "\"slots\": [figure paths or urls]}}], \"dropped\": [{{\"asset\": str, \"reason\": str}}]}}\n\n"
        "Subtask: {}\n{}\n\nMaterials:\n{}",
        subtask.title, subtask.description, listing);

    std::optional<Outline> parsed;
    std::vector<llm::Message> messages{llm::user_message(prompt)};
    for (int round = 0; round < 2 && !parsed; ++round) {
        const auto reply = gateway_.chat(ModelRole::writer_chat, messages, log, "writer.outline").text;
        parsed = parse_outline(reply, subtask);
        if (!parsed) {
            messages.push_back(llm::assistant_message(reply));
            messages.push_back(llm::user_message("That was not the requested JSON object. Reply with the JSON only."));
        }
    }
    if (!parsed) {
        log.warn("writer.outline", fmt::format("{}: no parseable outline; using one section per subtask", subtask.id));
        parsed = fallback_outline(subtask, materials);
    }
    Outline o = std::move(*parsed);

    const auto owners = figure_owners(materials);
    std::set<std::string> ids;
    for (const auto& m : materials) ids.insert(m.id);
    for (auto& sec : o.sections) {
        if (sec.heading.empty()) sec.heading = subtask.title;
        std::erase_if(sec.materials, [&](const std::string& id) {
            if (ids.contains(id)) return false;
            log.warn("writer.outline", fmt::format("{}: outline names unknown material {}", subtask.id, id));
            return true;
        });
        std::erase_if(sec.slots, [&](const std::string& slot) {
            if (owners.contains(slot)) return false;
            log.warn("writer.outline", fmt::format("{}: outline slot {} is not a known figure", subtask.id, slot));
            return true;
        });
    }
    std::erase_if(o.dropped, [&](DropRecord& d) {
        auto it = owners.find(d.asset);
        if (it == owners.end() || d.reason.empty()) return true;  // a drop needs a real asset and a reason
        d.material_id = it->second->id;
        return false;
    });
    if (o.sections.empty()) o.sections.push_back({subtask.title, {}, {}});

    // Every figure of a structured material needs a slot or a logged drop.
    for (const auto& m : materials) {
        for (const auto& asset : m.assets) {
            const bool slotted = std::any_of(o.sections.begin(), o.sections.end(), [&](const OutlineSection& s) {
                return std::find(s.slots.begin(), s.slots.end(), asset) != s.slots.end();
            });
            const bool dropped = std::any_of(o.dropped.begin(), o.dropped.end(),
                                             [&](const DropRecord& d) { return d.asset == asset; });
            if (slotted || dropped) continue;
            auto sec = std::find_if(o.sections.begin(), o.sections.end(), [&](const OutlineSection& s) {
                return std::find(s.materials.begin(), s.materials.end(), m.id) != s.materials.end();
            });
            if (sec == o.sections.end()) sec = std::prev(o.sections.end());
            sec->slots.push_back(asset);
            if (std::find(sec->materials.begin(), sec->materials.end(), m.id) == sec->materials.end())
                sec->materials.push_back(m.id);
            log.info("writer.outline", fmt::format("{}: added missing slot for {}", subtask.id, asset));
        }
    }
    for (const auto& d : o.dropped)
        log.info("writer.outline", fmt::format("{}: dropped {} ({})", subtask.id, d.asset, d.reason));
    return o;
}

SubtaskResult ReportWriter::write_subtask(const Subtask& subtask, const std::vector<SupportingMaterial>& materials,
                                          const store::ChunkStore& chunks, llm::ExchangeLog& log) {
    if (materials.empty()) throw WriterError(fmt::format("subtask {} has no materials to write from", subtask.id));
    SubtaskResult result;
    result.subtask_id = subtask.id;
    result.title = subtask.title;

    std::vector<SupportingMaterial> usable;
    for (const auto& m : materials)
        if (m.kind != MaterialKind::no_sources) usable.push_back(m);
    if (usable.empty()) {
        std::vector<std::string> queries;
        for (const auto& m : materials) queries.push_back("\"" + m.query + "\"");
        result.body = fmt::format(
            "## {}\n\nNo usable sources were found for this part of the question (searched: {}). It remains an "
            "evidence gap in this report.\n",
            subtask.title, text::join(queries, ", "));
        log.warn("writer.fill", fmt::format("{}: evidence gap, body written without sources", subtask.id));
        return result;
    }

    const auto plan = outline(subtask, usable, log);
    for (auto d : plan.dropped) result.drops.push_back(std::move(d));
    const auto owners = figure_owners(usable);

    std::string listing;
    for (const auto& m : usable) listing += describe(m) + "\n";
    std::string excerpts;
    for (const auto& c : chunks.fetch(subtask.id)) {
        if (excerpts.size() >= options_.max_chunk_chars) break;
        excerpts += fmt::format("[{} #{}]\n{}\n\n", c.source_url, c.position,
                                text::truncate_utf8(c.text, options_.max_chunk_chars - excerpts.size()));
    }
    const auto prompt = fmt::format(
        "Write the report section for the subtask below in markdown, following the outline. Start with '## {}' "
        "and use '### ' for the outline headings. Embed every outline slot as ![caption](slot) under its heading, "
        "with the path or url exactly as given. Cite web sources by url. Where materials disagree, state the "
        "disagreement and cite both sides. Use only the materials provided.\n\n"
        "Subtask: {}\n{}\n\nOutline:\n{}\n\nMaterials:\n{}\nRaw page excerpts:\n{}",
        subtask.title, subtask.title, subtask.description, to_json(plan).dump(2), listing,
        excerpts.empty() ? "(none)\n" : excerpts);

    auto strip_fabricated = [&](std::string& body) {
        for (const auto& t : md::remove_images_if_not(body, [&](const std::string& target) { return owners.contains(target); }))
            log.warn("writer.fill", fmt::format("{}: removed reference to unknown figure {}", subtask.id, t));
    };
    std::vector<std::pair<std::string, std::string>> slots;  // (heading, asset)
    for (const auto& sec : plan.sections)
        for (const auto& s : sec.slots) slots.emplace_back(sec.heading, s);
    auto missing_slots = [&](const std::string& body) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& s : slots)
            if (!md::references(body, s.second)) out.push_back(s);
        return out;
    };

    std::vector<llm::Message> messages{llm::user_message(prompt)};
    auto reply = gateway_.chat(ModelRole::writer_chat, messages, log, "writer.fill").text;
    std::string body = unwrap(reply);
    strip_fabricated(body);
    auto missing = missing_slots(body);
    if (!missing.empty() || body.empty()) {
        std::string list;
        for (const auto& [heading, asset] : missing) list += fmt::format("- {} (under \"{}\")\n", asset, heading);
        messages.push_back(llm::assistant_message(reply));
        messages.push_back(llm::user_message(
            body.empty() ? std::string("The section was empty. Write the full section.")
                         : fmt::format("The section omits these outline figures:\n{}Return the full section again "
                                       "with each of them embedded as ![caption](path).",
                                       list)));
        auto fixed = unwrap(gateway_.chat(ModelRole::writer_chat, messages, log, "writer.fill.fix").text);
        strip_fabricated(fixed);
        if (!fixed.empty()) body = std::move(fixed);
        missing = missing_slots(body);
    }
    if (body.empty()) {
        log.warn("writer.fill", fmt::format("{}: empty section twice; writing it from the materials", subtask.id));
        body = fmt::format("## {}\n", subtask.title);
        for (const auto& m : usable)
            body += "\n" + (m.kind == MaterialKind::structured ? m.insight : m.summary) + "\n";
        missing = missing_slots(body);
    }
    if (body.front() != '#') body = fmt::format("## {}\n\n{}", subtask.title, body);
    for (const auto& [heading, asset] : missing) {
        auto owner = owners.find(asset);
        const auto block = fmt::format("![{}]({})", caption_for(owner == owners.end() ? nullptr : owner->second), asset);
        body = md::insert_after_heading(body, heading, block);
        result.mechanical_insertion = true;
        log.warn("writer.fill", fmt::format("{}: mechanically inserted {} under \"{}\"", subtask.id, asset, heading));
    }
    result.body = text::trim(body) + "\n";

    std::set<std::string> known;
    for (const auto& m : usable) known.insert(m.cited_urls.begin(), m.cited_urls.end());
    for (const auto& url : text::extract_urls(result.body))
        if (known.contains(url)) result.citations.push_back(url);
    return result;
}

std::string concatenate_report(const std::vector<SubtaskResult>& results, const std::string& question) {
    std::vector<std::string> titles;
    for (const auto& r : results) titles.push_back(r.title);
    std::string out = fmt::format("# {}\n\nThis report addresses the question in {} part{}: {}.\n", text::trim(question),
                                  results.size(), results.size() == 1 ? "" : "s", text::join(titles, "; "));
    for (const auto& r : results) out += "\n" + text::trim(r.body) + "\n";
    out += "\n## Conclusion\n\nThe sections above cover " + text::join(titles, "; ") +
           ". Each section states its own findings together with the figures and sources behind them.\n";
    return md::dedupe_paragraphs(out);
}

FinalReport ReportWriter::refine_report(const std::vector<SubtaskResult>& results, const std::string& question,
                                        llm::ExchangeLog& log) {
    if (results.empty()) throw WriterError("no subtask results to refine");
    FinalReport report;
    std::vector<std::string> figures;
    std::map<std::string, std::string> owner_subtask;
    std::string draft;
    for (const auto& r : results) {
        for (const auto& d : r.drops) report.drops.push_back(d);
        for (const auto& t : md::image_targets(r.body)) {
            if (owner_subtask.emplace(t, r.subtask_id).second) figures.push_back(t);
        }
        draft += text::trim(r.body) + "\n\n";
    }
    const std::set<std::string> allowed(figures.begin(), figures.end());

    const auto prompt = fmt::format(
        "Refine the draft report below into one coherent report answering the question. Remove redundancy, resolve "
        "logical inconsistencies, add an introduction and a conclusion, and reorder sections if it reads better. Keep "
        "every figure reference ![..](..) exactly as written. Start with a '# ' title.\n\nQuestion: {}\n\nDraft:\n{}",
        question, draft);
    std::vector<llm::Message> messages{llm::user_message(prompt)};

    std::optional<std::string> accepted;
    std::vector<std::string> lost;
    for (int round = 1; round <= 2 && !accepted; ++round) {
        report.refine_attempts = round;
        const auto reply =
            gateway_.chat(ModelRole::writer_chat, messages, log, round == 1 ? "writer.refine" : "writer.refine.fix").text;
        auto body = unwrap(reply);
        for (const auto& t : md::remove_images_if_not(body, [&](const std::string& target) { return allowed.contains(target); }))
            log.warn("writer.refine", fmt::format("removed reference to unknown figure {}", t));
        lost.clear();
        for (const auto& f : figures)
            if (!md::references(body, f)) lost.push_back(f);
        const double share = figures.empty() ? 0.0 : static_cast<double>(lost.size()) / static_cast<double>(figures.size());
        if (!body.empty() && share <= options_.max_refine_drop) {
            accepted = std::move(body);
            break;
        }
        log.warn("writer.refine",
                 body.empty() ? std::string("refinement came back empty")
                              : fmt::format("refinement dropped {} of {} figures; rejected", lost.size(), figures.size()));
        messages.push_back(llm::assistant_message(reply));
        messages.push_back(llm::user_message(fmt::format(
            "The refined report removed {} of {} figures. Return the full report again keeping every figure: {}",
            lost.size(), figures.size(), text::join(lost, ", "))));
    }

    if (accepted) {
        for (const auto& f : lost) {
            report.drops.push_back({f, "", "refine", "removed during refinement"});
            log.info("writer.refine", fmt::format("refinement removed {} (from {})", f, owner_subtask[f]));
        }
        if (accepted->front() != '#') *accepted = fmt::format("# {}\n\n{}", text::trim(question), *accepted);
        report.markdown = md::dedupe_paragraphs(*accepted + "\n");
    } else {
        log.warn("writer.refine", "falling back to concatenating the subtask sections");
        report.fallback = true;
        report.markdown = concatenate_report(results, question);
    }
    return report;
}

}  // namespace strata::writer

#include "strata/core/material.hpp"

#include <fmt/format.h>

#include "strata/common/text.hpp"

namespace strata {

std::string_view to_string(MaterialKind kind) noexcept {
    switch (kind) {
        case MaterialKind::text: return "text";
        case MaterialKind::structured: return "structured";
        case MaterialKind::no_sources: return "no_sources";
    }
    return "text";
}

std::string SupportingMaterial::planner_view() const {
    switch (kind) {
        case MaterialKind::text:
            return fmt::format("[{}] web summary for \"{}\":\n{}", id, query, summary);
        case MaterialKind::no_sources:
            return fmt::format("[{}] web search for \"{}\" found no usable sources.", id, query);
        case MaterialKind::structured:
            return fmt::format("[{}] analysis of table {} ({}): {} figure(s), {} table(s). Insight: {}", id, table_id,
                               table_title, assets.size(), tables.size(), insight);
    }
    return {};
}

nlohmann::json to_json(const SupportingMaterial& m) {
    nlohmann::json j{{"id", m.id}, {"kind", to_string(m.kind)}, {"subtask_id", m.subtask_id}, {"query", m.query}};
    if (m.kind == MaterialKind::structured) {
        j["table_id"] = m.table_id;
        j["table_title"] = m.table_title;
        j["assets"] = m.assets;
        j["tables"] = m.tables;
        j["insight"] = m.insight;
        j["verdict"] = m.verdict;
        j["code_attempts"] = m.code_attempts;
        j["validation_rounds"] = m.validation_rounds;
    } else {
        j["intent"] = m.intent;
        j["summary"] = m.summary;
        j["cited_urls"] = m.cited_urls;
        j["figure_urls"] = m.figure_urls;
    }
    return j;
}

SupportingMaterial material_from_json(const nlohmann::json& j) {
    SupportingMaterial m;
    m.id = j.value("id", "");
    const auto kind = j.value("kind", "text");
    m.kind = kind == "structured" ? MaterialKind::structured
             : kind == "no_sources" ? MaterialKind::no_sources
                                    : MaterialKind::text;
    m.subtask_id = j.value("subtask_id", "");
    m.query = j.value("query", "");
    m.intent = j.value("intent", "");
    m.summary = j.value("summary", "");
    m.cited_urls = j.value("cited_urls", std::vector<std::string>{});
    m.figure_urls = j.value("figure_urls", std::vector<std::string>{});
    m.table_id = j.value("table_id", "");
    m.table_title = j.value("table_title", "");
    m.assets = j.value("assets", std::vector<std::string>{});
    m.tables = j.value("tables", std::vector<std::string>{});
    m.insight = j.value("insight", "");
    m.verdict = j.value("verdict", "");
    m.code_attempts = j.value("code_attempts", 0);
    m.validation_rounds = j.value("validation_rounds", 0);
    return m;
}

}  // namespace strata

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata {

enum class MaterialKind {
    text,        // web summary from the unstructured analyzer
    structured,  // validated table analysis: figures and/or tables plus insight
    no_sources,  // web search produced nothing usable
};

std::string_view to_string(MaterialKind kind) noexcept;

// Output of one analyzer call, as consumed by the planner and the writer.
struct SupportingMaterial {
    std::string id;
    MaterialKind kind = MaterialKind::text;
    std::string subtask_id;
    std::string query;

    // text
    std::string intent;
    std::string summary;
    std::vector<std::string> cited_urls;
    std::vector<std::string> figure_urls;  // web figures, cited by url only

    // structured
    std::string table_id;
    std::string table_title;
    std::vector<std::string> assets;  // bundle-relative, e.g. assets/M2_1.png
    std::vector<std::string> tables;  // markdown tables printed by the analysis code
    std::string insight;
    std::string verdict;  // "valid" for anything forwarded
    int code_attempts = 0;
    int validation_rounds = 0;

    // What the planner is allowed to see of this material.
    std::string planner_view() const;
};

nlohmann::json to_json(const SupportingMaterial& m);
SupportingMaterial material_from_json(const nlohmann::json& j);

}  // namespace strata

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::store {

enum class Domain {
    agriculture,
    politics_economics,
    energy_environment,
    finance_insurance,
    metals_electronics,
    society,
    art,
    technology,
    transportation,
};

inline constexpr int kDomainCount = 9;

std::string_view to_string(Domain d) noexcept;
std::string_view abbreviation(Domain d) noexcept;
// Accepts the snake_case name, the display name, or the short abbreviation.
std::optional<Domain> parse_domain(std::string_view s);

struct SchemaField {
    std::string name;
    std::string type;
    std::string description;
};

// Comment-style table schema shown to the code model instead of the data:
//
//   # real_gdp_growth_of_canada = [...]
//   #   - year (int): calendar year
//   #   - growth (float): real GDP growth in percent
//
// Field lines are either bullets (`- name ...`) or `name (type): ...`.
struct SchemaComment {
    std::string variable;
    std::vector<SchemaField> fields;

    std::vector<std::string> field_names() const;
};

SchemaComment parse_schema_comment(std::string_view comment);

struct TableRecord {
    std::string id;
    std::string title;
    std::string summary;
    std::string schema_comment;
    nlohmann::json payload = nlohmann::json::array();
    Domain domain = Domain::society;
    std::optional<std::string> source_uri;

    // Name the payload is bound to inside the sandbox.
    std::string variable_name() const;
    // Text the dense retriever embeds.
    std::string description_text() const;
};

// Throws ValidationError naming the table id.
void validate(const TableRecord& table);

}  // namespace strata::store

#include "strata/store/table_record.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace strata::store {

namespace {

struct DomainNames {
    Domain domain;
    std::string_view snake;
    std::string_view display;
    std::string_view abbrev;
};

constexpr std::array<DomainNames, kDomainCount> kDomains{{
    {Domain::agriculture, "agriculture", "Agriculture", "Agr."},
    {Domain::politics_economics, "politics_economics", "Politics & Economics", "P&E"},
    {Domain::energy_environment, "energy_environment", "Energy & Environment", "E&E"},
    {Domain::finance_insurance, "finance_insurance", "Finance & Insurance", "F&I"},
    {Domain::metals_electronics, "metals_electronics", "Metals & Electronics", "M&E"},
    {Domain::society, "society", "Society", "Soc."},
    {Domain::art, "art", "Art", "Art"},
    {Domain::technology, "technology", "Technology", "Tech."},
    {Domain::transportation, "transportation", "Transportation", "Trans."},
}};

const DomainNames& names_of(Domain d) {
    return kDomains[static_cast<std::size_t>(d)];
}

}  // namespace

std::string_view to_string(Domain d) noexcept { return names_of(d).snake; }
std::string_view abbreviation(Domain d) noexcept { return names_of(d).abbrev; }

std::optional<Domain> parse_domain(std::string_view s) {
    const std::string needle = text::to_lower(text::trim(s));
    for (const auto& n : kDomains) {
        if (needle == n.snake || needle == text::to_lower(n.display) || needle == text::to_lower(n.abbrev))
            return n.domain;
    }
    return std::nullopt;
}

std::vector<std::string> SchemaComment::field_names() const {
    std::vector<std::string> out;
    out.reserve(fields.size());
    for (const auto& f : fields) out.push_back(f.name);
    return out;
}

SchemaComment parse_schema_comment(std::string_view comment) {
    static const std::regex kVariable(R"(^\s*#\s*([A-Za-z_]\w*)\s*=\s*\[.*$)");
    static const std::regex kBullet(R"(^\s*#\s*-\s*([A-Za-z_]\w*)\s*(?:\(([^)]*)\))?\s*(?::\s*(.*))?$)");
    static const std::regex kTyped(R"(^\s*#\s*([A-Za-z_]\w*)\s*\(([^)]*)\)\s*:\s*(.*)$)");

    SchemaComment out;
    for (const auto& line : text::split_lines(comment)) {
        std::smatch m;
        if (out.variable.empty() && std::regex_match(line, m, kVariable)) {
            out.variable = m[1].str();
        } else if (std::regex_match(line, m, kBullet) || std::regex_match(line, m, kTyped)) {
            out.fields.push_back({m[1].str(), text::trim(m[2].str()), text::trim(m[3].str())});
        }
    }
    return out;
}

std::string TableRecord::variable_name() const {
    auto schema = parse_schema_comment(schema_comment);
    if (!schema.variable.empty()) return schema.variable;
    std::string name;
    for (char c : id) name += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    if (name.empty() || std::isdigit(static_cast<unsigned char>(name.front()))) name = "table_" + name;
    return name;
}

std::string TableRecord::description_text() const { return title + "\n\n" + summary; }

void validate(const TableRecord& table) {
    if (table.id.empty()) throw ValidationError("<unnamed table>", "empty id");
    if (!table.payload.is_array() || table.payload.empty())
        throw ValidationError(table.id, "payload must be a non-empty array of records");

    const auto schema = parse_schema_comment(table.schema_comment);
    if (schema.fields.empty()) throw ValidationError(table.id, "schema_comment describes no fields");
    std::set<std::string> described;
    for (const auto& f : schema.fields) {
        if (!described.insert(f.name).second)
            throw ValidationError(table.id, fmt::format("field '{}' described twice", f.name));
    }

    for (std::size_t i = 0; i < table.payload.size(); ++i) {
        const auto& record = table.payload[i];
        if (!record.is_object())
            throw ValidationError(table.id, fmt::format("payload record {} is not an object", i));
        std::set<std::string> keys;
        for (const auto& [key, value] : record.items()) {
            if (value.is_object() || value.is_array())
                throw ValidationError(table.id, fmt::format("payload record {} field '{}' is not flat", i, key));
            keys.insert(key);
        }
        std::vector<std::string> undocumented;
        std::set_difference(keys.begin(), keys.end(), described.begin(), described.end(),
                            std::back_inserter(undocumented));
        if (!undocumented.empty())
            throw ValidationError(table.id, fmt::format("payload key(s) absent from schema_comment: {}",
                                                        text::join(undocumented, ", ")));
        std::vector<std::string> missing;
        std::set_difference(described.begin(), described.end(), keys.begin(), keys.end(),
                            std::back_inserter(missing));
        if (!missing.empty())
            throw ValidationError(table.id, fmt::format("payload record {} lacks schema field(s): {}", i,
                                                        text::join(missing, ", ")));
    }
}

}  // namespace strata::store

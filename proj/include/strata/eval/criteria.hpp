#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::eval {

struct Criterion {
    std::string text;
    double weight = 0.0;
};

struct Dimension {
    std::string name;  // Comprehensiveness | Depth | Readability | Coherence
    double weight = 0.0;
    std::vector<Criterion> criteria;
};

struct CriterionSet {
    std::vector<Dimension> dimensions;
    double score_min = 0.0;  // the judge's declared scale
    double score_max = 10.0;
};

inline constexpr double kWeightTolerance = 1e-9;
inline constexpr const char* kDimensionNames[] = {"Comprehensiveness", "Depth", "Readability", "Coherence"};

// Throws ValidationError("criteria", ...) on any violated invariant.
void validate(const CriterionSet& set);

// {"scale": [0, 10], "dimensions": [{"name", "weight"?, "criteria": [{"text", "weight"}]}]}.
// Omitted weights are filled in equally.
CriterionSet criteria_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CriterionSet& set);
CriterionSet load_criteria(const std::filesystem::path& path);

// Four dimensions with five equally weighted criteria each.
CriterionSet default_criteria();

}  // namespace strata::eval

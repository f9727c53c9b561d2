#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/eval/criteria.hpp"

namespace strata::eval {

using ScorePair = std::pair<double, double>;  // (generated, reference)

struct CriterionScore {
    std::string dimension;
    std::string criterion;
    double weight = 0.0;  // effective weight after renormalization; 0 when missing
    std::optional<ScorePair> scores;
};

struct DimensionScore {
    std::string name;
    double weight = 0.0;  // effective
    double gen = 0.0;
    double ref = 0.0;
    int missing = 0;
};

struct ScoreSheet {
    std::vector<CriterionScore> criteria;
    std::vector<DimensionScore> dimensions;
    double gen_intermediate = 0.0;
    double ref_intermediate = 0.0;
    double overall = 0.0;
};

nlohmann::json to_json(const ScoreSheet& s);

// gen / (gen + ref); 0.5 when both are 0.
double relative_overall(double gen, double ref);

// Pure fold over judge outputs. `pairs` follows the criterion order of `set`
// (dimension by dimension); nullopt marks a criterion the judge never scored,
// whose weight is redistributed within its dimension. A dimension with
// nothing scored drops out and the dimension weights are renormalized.
ScoreSheet aggregate(const CriterionSet& set, const std::vector<std::optional<ScorePair>>& pairs);

double coverage_score(const std::vector<int>& coverage);
// Share of key points both covered and backed by their table.
double supportiveness_score(const std::vector<int>& coverage, const std::vector<int>& table_use);
double win_rate(const std::vector<int>& indicators);
double mean(const std::vector<double>& values);

}  // namespace strata::eval

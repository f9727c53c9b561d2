#include "strata/eval/metrics.hpp"

#include <numeric>

#include <fmt/format.h>

#include "strata/common/errors.hpp"

namespace strata::eval {

nlohmann::json to_json(const ScoreSheet& s) {
    nlohmann::json crit = nlohmann::json::array();
    for (const auto& c : s.criteria) {
        nlohmann::json j{{"dimension", c.dimension}, {"criterion", c.criterion}, {"weight", c.weight}};
        if (c.scores) {
            j["gen"] = c.scores->first;
            j["ref"] = c.scores->second;
        } else {
            j["missing"] = true;
        }
        crit.push_back(std::move(j));
    }
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : s.dimensions)
        dims.push_back({{"name", d.name}, {"weight", d.weight}, {"gen", d.gen}, {"ref", d.ref}, {"missing", d.missing}});
    return {{"criteria", crit},
            {"dimensions", dims},
            {"gen_intermediate", s.gen_intermediate},
            {"ref_intermediate", s.ref_intermediate},
            {"overall", s.overall}};
}

double relative_overall(double gen, double ref) {
    const double total = gen + ref;
    return total == 0.0 ? 0.5 : gen / total;
}

ScoreSheet aggregate(const CriterionSet& set, const std::vector<std::optional<ScorePair>>& pairs) {
    std::size_t expected = 0;
    for (const auto& d : set.dimensions) expected += d.criteria.size();
    if (pairs.size() != expected)
        throw EvaluationError(fmt::format("{} criterion scores for {} criteria", pairs.size(), expected));

    ScoreSheet sheet;
    std::size_t k = 0;
    double dim_weight_total = 0.0;
    for (const auto& d : set.dimensions) {
        DimensionScore ds{d.name, 0.0, 0.0, 0.0, 0};
        double present = 0.0;
        for (std::size_t i = 0; i < d.criteria.size(); ++i)
            if (pairs[k + i]) present += d.criteria[i].weight;
        for (std::size_t i = 0; i < d.criteria.size(); ++i, ++k) {
            CriterionScore cs{d.name, d.criteria[i].text, 0.0, pairs[k]};
            if (!pairs[k]) {
                ++ds.missing;
            } else if (present > 0.0) {
                cs.weight = d.criteria[i].weight / present;
                ds.gen += cs.weight * pairs[k]->first;
                ds.ref += cs.weight * pairs[k]->second;
            }
            sheet.criteria.push_back(std::move(cs));
        }
        if (present > 0.0) {
            ds.weight = d.weight;
            dim_weight_total += d.weight;
        }
        sheet.dimensions.push_back(ds);
    }
    if (dim_weight_total <= 0.0) throw EvaluationError("no criterion was scored");
    for (auto& ds : sheet.dimensions) {
        ds.weight /= dim_weight_total;
        sheet.gen_intermediate += ds.weight * ds.gen;
        sheet.ref_intermediate += ds.weight * ds.ref;
    }
    sheet.overall = relative_overall(sheet.gen_intermediate, sheet.ref_intermediate);
    return sheet;
}

double coverage_score(const std::vector<int>& coverage) {
    if (coverage.empty()) throw EvaluationError("no key points");
    return static_cast<double>(std::accumulate(coverage.begin(), coverage.end(), 0)) / static_cast<double>(coverage.size());
}

double supportiveness_score(const std::vector<int>& coverage, const std::vector<int>& table_use) {
    if (coverage.size() != table_use.size())
        throw EvaluationError(fmt::format("{} coverage indicators vs {} table-use indicators", coverage.size(), table_use.size()));
    if (coverage.empty()) throw EvaluationError("no key points");
    int both = 0;
    for (std::size_t i = 0; i < coverage.size(); ++i) both += (coverage[i] != 0 && table_use[i] != 0) ? 1 : 0;
    return static_cast<double>(both) / static_cast<double>(coverage.size());
}

double win_rate(const std::vector<int>& indicators) {
    if (indicators.empty()) throw EvaluationError("no judged pairs");
    return static_cast<double>(std::accumulate(indicators.begin(), indicators.end(), 0)) / static_cast<double>(indicators.size());
}

double mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace strata::eval

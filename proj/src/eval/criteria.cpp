#include "strata/eval/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "strata/common/errors.hpp"

namespace strata::eval {

void validate(const CriterionSet& set) {
    auto fail = [](const std::string& why) { throw ValidationError("criteria", why); };
    if (set.dimensions.empty()) fail("no dimensions");
    if (!(set.score_max > set.score_min)) fail("score scale is empty");
    for (const auto& d : set.dimensions) {
        if (std::find(std::begin(kDimensionNames), std::end(kDimensionNames), d.name) == std::end(kDimensionNames))
            fail(fmt::format("unknown dimension '{}'", d.name));
        if (d.criteria.empty()) fail(fmt::format("dimension {} has no criteria", d.name));
        double sum = 0.0;
        for (const auto& c : d.criteria) {
            if (c.weight < 0.0) fail(fmt::format("negative criterion weight in {}", d.name));
            if (c.text.empty()) fail(fmt::format("empty criterion text in {}", d.name));
            sum += c.weight;
        }
        if (std::abs(sum - 1.0) > kWeightTolerance)
            fail(fmt::format("criterion weights of {} sum to {:.12f}, not 1", d.name, sum));
        if (std::abs(d.weight - set.dimensions.front().weight) > kWeightTolerance)
            fail("dimension weights must all be equal");
    }
    double total = 0.0;
    for (const auto& d : set.dimensions) total += d.weight;
    if (std::abs(total - 1.0) > kWeightTolerance) fail(fmt::format("dimension weights sum to {:.12f}, not 1", total));
}

CriterionSet criteria_from_json(const nlohmann::json& j) {
    CriterionSet set;
    try {
        if (j.contains("scale")) {
            set.score_min = j.at("scale").at(0).get<double>();
            set.score_max = j.at("scale").at(1).get<double>();
        }
        for (const auto& dj : j.at("dimensions")) {
            Dimension d;
            d.name = dj.at("name").get<std::string>();
            d.weight = dj.value("weight", -1.0);
            for (const auto& cj : dj.at("criteria")) {
                if (cj.is_string()) d.criteria.push_back({cj.get<std::string>(), -1.0});
                else d.criteria.push_back({cj.at("text").get<std::string>(), cj.value("weight", -1.0)});
            }
            if (std::all_of(d.criteria.begin(), d.criteria.end(), [](const Criterion& c) { return c.weight < 0; }))
                for (auto& c : d.criteria) c.weight = 1.0 / static_cast<double>(d.criteria.size());
            set.dimensions.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("criteria", e.what());
    }
    if (std::all_of(set.dimensions.begin(), set.dimensions.end(), [](const Dimension& d) { return d.weight < 0; }))
        for (auto& d : set.dimensions) d.weight = 1.0 / static_cast<double>(set.dimensions.size());
    validate(set);
    return set;
}

nlohmann::json to_json(const CriterionSet& set) {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : set.dimensions) {
        nlohmann::json crit = nlohmann::json::array();
        for (const auto& c : d.criteria) crit.push_back({{"text", c.text}, {"weight", c.weight}});
        dims.push_back({{"name", d.name}, {"weight", d.weight}, {"criteria", crit}});
    }
    return {{"scale", {set.score_min, set.score_max}}, {"dimensions", dims}};
}

CriterionSet load_criteria(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("criteria", fmt::format("cannot open {}", path.string()));
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError("criteria", fmt::format("{} is not valid JSON", path.string()));
    return criteria_from_json(j);
}

CriterionSet default_criteria() {
    const nlohmann::json j = {
        {"scale", {0, 10}},
        {"dimensions",
         {{{"name", "Comprehensiveness"},
           {"criteria",
            {"Covers every aspect the question asks about",
             "Combines evidence from data tables with evidence from web sources",
             "Gives concrete figures, periods and regions rather than generalities",
             "Addresses relevant stakeholders and perspectives",
             "Acknowledges gaps or limitations in the available evidence"}}},
          {{"name", "Depth"},
           {"criteria",
            {"Explains causes and mechanisms behind the reported trends",
             "Draws quantitative comparisons from the analysed data",
             "Interprets figures and tables instead of only restating them",
             "Reaches conclusions that follow from the evidence presented",
             "Discusses implications and likely future developments"}}},
          {{"name", "Readability"},
           {"criteria",
            {"Has a clear structure with informative headings",
             "Uses figures and tables that are labelled and easy to read",
             "Writes in clear, concise and precise language",
             "Places figures next to the text that discusses them",
             "Cites sources in a consistent, checkable way"}}},
          {{"name", "Coherence"},
           {"criteria",
            {"Sections follow a logical order toward the answer",
             "Contains no contradictions between sections",
             "Avoids redundant or repeated content",
             "Introduction and conclusion match the body of the report",
             "Terminology and units are used consistently"}}}}}};
    return criteria_from_json(j);
}

}  // namespace strata::eval

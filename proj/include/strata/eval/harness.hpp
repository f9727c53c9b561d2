#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/eval/judge.hpp"

namespace strata::eval {

// A report bundle as the evaluator reads it: report.md plus meta.json.
struct BundleInput {
    std::filesystem::path dir;
    std::string question_id;
    std::string question;
    std::string domain;  // "unspecified" when meta.json has none
    std::string report;
};

// Throws ValidationError when report.md is missing.
BundleInput read_bundle(const std::filesystem::path& dir);
// A reference may be a bundle directory or a bare markdown file.
std::string read_reference(const std::filesystem::path& path);

struct RaceItem {
    BundleInput gen;
    std::string reference;
};

// Each evaluation writes scores/<question_id>.json (one key per mode, other
// modes' keys preserved) and merges its aggregate into scores/summary.json.
// The returned JSON is the aggregate that was merged.
nlohmann::json evaluate_race(Judge& judge, const std::vector<RaceItem>& items, const CriterionSet& criteria,
                             const std::filesystem::path& scores_dir);

nlohmann::json evaluate_knowledge(Judge& judge, const std::vector<BundleInput>& bundles,
                                  const std::filesystem::path& points_dir,
                                  const std::map<std::string, std::string>& table_descriptions,
                                  const std::filesystem::path& scores_dir);

// Compiles every bundle to <scores_dir>/pdf/<agent>/<question_id>/ first; a
// failed compilation excludes that question.
nlohmann::json evaluate_vision(Judge& judge, const std::vector<BundleInput>& a, const std::vector<BundleInput>& b,
                               const std::string& agent_a, const std::string& agent_b, std::uint64_t seed,
                               const std::filesystem::path& scores_dir);

// Plain-text rendering of one mode's aggregate, for the terminal.
std::string render_summary(const std::string& mode, const nlohmann::json& aggregate);

}  // namespace strata::eval

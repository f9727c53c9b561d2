#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/eval/criteria.hpp"
#include "strata/eval/metrics.hpp"
#include "strata/llm/gateway.hpp"

namespace strata::eval {

struct KeyPoint {
    std::string text;
    std::string table_id;
};

struct KnowledgePointSet {
    std::string question_id;
    std::string question;
    std::string main_conclusion;
    std::vector<KeyPoint> key_points;
    std::set<std::string> ground_truth_tables;
};

// Throws ValidationError on an empty point list or a table_id outside T.
KnowledgePointSet points_from_json(const nlohmann::json& j);
KnowledgePointSet load_points(const std::filesystem::path& path);

struct IndicatorResult {
    double score = 0.0;
    std::vector<int> indicators;
};

struct WinRecord {
    std::string question_id;
    std::string domain;
    std::string agent_a;
    std::string agent_b;
    int indicator = 0;     // 1 when the judge prefers A
    bool swapped = false;  // B was shown first
};

struct Exclusion {
    std::string question_id;
    std::string reason;
};

struct WinRateResult {
    std::uint64_t seed = 0;
    std::vector<WinRecord> records;
    std::vector<Exclusion> excluded;
    double rate = 0.0;
    std::map<std::string, double> per_domain;  // unweighted mean per domain
};

// One compiled report as the vision judge sees it; `pages` empty when
// compilation failed.
struct ComparedReport {
    std::string question_id;
    std::string domain;
    std::vector<std::filesystem::path> pages;
    std::string compile_error;
};

// Every judge-facing metric. Judge calls are sequential so exchange ids are
// stable; aggregation itself is the pure fold in metrics.hpp.
class Judge {
public:
    Judge(llm::Gateway& gateway, llm::ExchangeLog& log) : gateway_(gateway), log_(log) {}

    // One judge_text call per criterion; unusable answers get one re-prompt and
    // are then scored as missing.
    ScoreSheet race_score(const std::string& gen, const std::string& ref, const CriterionSet& set,
                          const std::string& question = {});
    // Raw per-criterion pairs in criterion order, for re-aggregation.
    std::vector<std::optional<ScorePair>> race_pairs(const std::string& gen, const std::string& ref,
                                                     const CriterionSet& set, const std::string& question = {});

    // 0..100: the judge's 0..10 integer times ten.
    double main_alignment(const std::string& gen, const std::string& main_conclusion, const std::string& question);
    IndicatorResult key_coverage(const std::string& gen, const std::vector<KeyPoint>& points, const std::string& question);
    // Per-point table-use indicators; `tables` maps table ids to a short description.
    std::vector<int> table_use(const std::string& gen, const std::vector<KeyPoint>& points,
                               const std::map<std::string, std::string>& tables, const std::string& question);
    IndicatorResult key_supportiveness(const std::string& gen, const std::vector<KeyPoint>& points,
                                       const std::vector<int>& coverage,
                                       const std::map<std::string, std::string>& tables, const std::string& question);

    // One judge_vision call per aligned pair; A/B order drawn from mt19937_64(seed).
    WinRateResult vision_win_rate(const std::vector<ComparedReport>& a, const std::vector<ComparedReport>& b,
                                  const std::string& agent_a, const std::string& agent_b, std::uint64_t seed);

private:
    std::vector<int> indicator_call(const std::string& prompt, std::size_t expected, const std::string& tag);

    llm::Gateway& gateway_;
    llm::ExchangeLog& log_;
};

// "PREFER: 1" / "PREFER: 2" (also a bare 1 or 2); nullopt otherwise.
std::optional<int> parse_preference(const std::string& reply);
// First integer after "SCORE:", or a lone integer reply.
std::optional<int> parse_score(const std::string& reply);
// {"report_1": x, "report_2": y}, {"gen": x, "ref": y} or [x, y].
std::optional<ScorePair> parse_score_pair(const std::string& reply);
// A JSON array of 0/1 (or booleans).
std::optional<std::vector<int>> parse_indicators(const std::string& reply);

}  // namespace strata::eval

#include "strata/eval/judge.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/writer/bundle.hpp"

namespace strata::eval {

using llm::ModelRole;

namespace {

constexpr const char* kSystem = "You are a strict, impartial evaluator of research reports.";

std::optional<double> as_number(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        try {
            std::size_t used = 0;
            const double v = std::stod(j.get<std::string>(), &used);
            if (used == j.get<std::string>().size()) return v;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

std::string numbered_points(const std::vector<KeyPoint>& points, const std::map<std::string, std::string>* tables) {
    std::string out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        out += fmt::format("{}. {}", i + 1, points[i].text);
        if (tables) {
            auto it = tables->find(points[i].table_id);
            out += fmt::format(" [table {}{}]", points[i].table_id,
                               it != tables->end() && !it->second.empty() ? ": " + it->second : "");
        }
        out += "\n";
    }
    return out;
}

}  // namespace

KnowledgePointSet points_from_json(const nlohmann::json& j) {
    KnowledgePointSet p;
    p.question_id = j.value("question_id", std::string{});
    p.question = j.value("question", std::string{});
    p.main_conclusion = j.value("main_conclusion", std::string{});
    const std::string subject = p.question_id.empty() ? "points" : "points/" + p.question_id;
    if (j.contains("ground_truth_tables"))
        for (const auto& t : j["ground_truth_tables"]) p.ground_truth_tables.insert(t.get<std::string>());
    if (j.contains("key_points")) {
        for (const auto& k : j["key_points"]) {
            KeyPoint kp;
            if (k.is_string()) {
                kp.text = k.get<std::string>();
            } else {
                kp.text = k.value("text", std::string{});
                kp.table_id = k.value("table_id", std::string{});
            }
            if (text::trim(kp.text).empty()) throw ValidationError(subject, "key point with empty text");
            if (!kp.table_id.empty() && !p.ground_truth_tables.count(kp.table_id))
                throw ValidationError(subject, fmt::format("key point table_id {} is not in ground_truth_tables", kp.table_id));
            p.key_points.push_back(std::move(kp));
        }
    }
    if (p.key_points.empty()) throw ValidationError(subject, "key_points must not be empty");
    if (text::trim(p.main_conclusion).empty()) throw ValidationError(subject, "main_conclusion must not be empty");
    return p;
}

KnowledgePointSet load_points(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ValidationError(path.string(), "points file not found");
    return points_from_json(writer::read_json_file(path));
}

std::optional<int> parse_preference(const std::string& reply) {
    static const std::regex tagged(R"(prefer\w*\s*[:=]?\s*\**\s*(?:report\s*)?([12])\b)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(reply, m, tagged)) return m[1].str() == "1" ? 1 : 2;
    const auto t = text::trim(reply);
    if (t == "1" || t == "2") return t == "1" ? 1 : 2;
    return std::nullopt;
}

std::optional<int> parse_score(const std::string& reply) {
    static const std::regex tagged(R"(score\s*\**\s*[:=]\s*\**\s*(-?\d+(?:\.\d+)?))", std::regex::icase);
    static const std::regex lone(R"(^\s*(-?\d+(?:\.\d+)?)\s*(?:/\s*10)?\s*$)");
    std::smatch m;
    std::string v;
    if (std::regex_search(reply, m, tagged) || std::regex_match(reply, m, lone)) v = m[1].str();
    if (v.empty() || v.find('.') != std::string::npos) return std::nullopt;
    return std::stoi(v);
}

std::optional<ScorePair> parse_score_pair(const std::string& reply) {
    auto j = text::extract_json(reply);
    if (!j) return std::nullopt;
    std::optional<double> a, b;
    if (j->is_array() && j->size() == 2) {
        a = as_number((*j)[0]);
        b = as_number((*j)[1]);
    } else if (j->is_object()) {
        for (auto [ka, kb] : {std::pair{"report_1", "report_2"}, std::pair{"gen", "ref"}}) {
            if (j->contains(ka) && j->contains(kb)) {
                a = as_number((*j)[ka]);
                b = as_number((*j)[kb]);
                break;
            }
        }
    }
    if (!a || !b || !std::isfinite(*a) || !std::isfinite(*b)) return std::nullopt;
    return ScorePair{*a, *b};
}

std::optional<std::vector<int>> parse_indicators(const std::string& reply) {
    auto j = text::extract_json(reply);
    if (j && j->is_object()) {
        for (const auto& [k, v] : j->items())
            if (v.is_array()) {
                j = v;
                break;
            }
    }
    if (!j || !j->is_array()) return std::nullopt;
    std::vector<int> out;
    for (const auto& v : *j) {
        if (v.is_boolean()) {
            out.push_back(v.get<bool>() ? 1 : 0);
        } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
            out.push_back(v.get<int>());
        } else {
            return std::nullopt;
        }
    }
    return out;
}

std::vector<std::optional<ScorePair>> Judge::race_pairs(const std::string& gen, const std::string& ref,
                                                        const CriterionSet& set, const std::string& question) {
    validate(set);
    if (text::trim(gen).empty()) throw EvaluationError("generated report is empty");
    if (text::trim(ref).empty()) throw EvaluationError("reference report is empty");
    std::vector<std::optional<ScorePair>> pairs;
    const auto lo = set.score_min, hi = set.score_max;
    for (const auto& d : set.dimensions) {
        for (const auto& c : d.criteria) {
            std::vector<llm::Message> msgs{
                llm::system_message(kSystem),
                llm::user_message(fmt::format(
                    "Score two research reports against one criterion, each on a {}-{} scale.\n"
                    "Dimension: {}\nCriterion: {}\n\nQuestion: {}\n\n<report_1>\n{}\n</report_1>\n\n<report_2>\n{}\n"
                    "</report_2>\n\nReply with only a JSON object {{\"report_1\": <score>, \"report_2\": <score>}}.",
                    lo, hi, d.name, c.text, question, gen, ref))};
            std::optional<ScorePair> got;
            for (int attempt = 0; attempt < 2 && !got; ++attempt) {
                auto reply = gateway_.chat(ModelRole::judge_text, msgs, log_, attempt ? "eval.race.fix" : "eval.race");
                auto p = parse_score_pair(reply.text);
                std::string why;
                if (!p) {
                    why = "it is not a JSON object with report_1 and report_2 scores";
                } else if (p->first < lo || p->first > hi || p->second < lo || p->second > hi) {
                    why = fmt::format("scores must lie within {}-{}", lo, hi);
                } else {
                    got = p;
                    break;
                }
                msgs.push_back(llm::assistant_message(reply.text));
                msgs.push_back(llm::user_message(fmt::format("Your reply could not be used: {}. Reply with only the JSON object.", why)));
            }
            if (!got)
                log_.warn("eval.race", fmt::format("criterion \"{}\" ({}) scored as missing after a re-prompt", c.text, d.name));
            pairs.push_back(got);
        }
    }
    return pairs;
}

ScoreSheet Judge::race_score(const std::string& gen, const std::string& ref, const CriterionSet& set,
                             const std::string& question) {
    auto pairs = race_pairs(gen, ref, set, question);
    auto sheet = aggregate(set, pairs);
    for (const auto& d : sheet.dimensions)
        if (d.missing > 0)
            log_.info("eval.race", fmt::format("{}: {} missing criterion score(s); weights renormalized", d.name, d.missing));
    return sheet;
}

double Judge::main_alignment(const std::string& gen, const std::string& main_conclusion, const std::string& question) {
    if (text::trim(main_conclusion).empty()) throw EvaluationError("main conclusion is empty");
    std::vector<llm::Message> msgs{
        llm::system_message(kSystem),
        llm::user_message(fmt::format(
            "Rate how well the report agrees with the annotated main conclusion on an integer 0-10 scale.\n\n"
            "Question: {}\nMain conclusion: {}\n\n<report>\n{}\n</report>\n\nReply with 'SCORE: <integer 0-10>'.",
            question, main_conclusion, gen))};
    std::optional<int> last;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto reply = gateway_.chat(ModelRole::judge_text, msgs, log_, attempt ? "eval.main.fix" : "eval.main");
        auto s = parse_score(reply.text);
        if (s && *s >= 0 && *s <= 10) return *s * 10.0;
        if (s) last = s;
        msgs.push_back(llm::assistant_message(reply.text));
        msgs.push_back(llm::user_message("The score must be a single integer from 0 to 10. Reply with 'SCORE: <integer>'."));
    }
    if (!last) throw EvaluationError("main alignment judge gave no usable score after a re-prompt");
    const int clamped = std::clamp(*last, 0, 10);
    log_.warn("eval.main", fmt::format("judge score {} outside 0-10; clamped to {}", *last, clamped));
    return clamped * 10.0;
}

std::vector<int> Judge::indicator_call(const std::string& prompt, std::size_t expected, const std::string& tag) {
    std::vector<llm::Message> msgs{llm::system_message(kSystem), llm::user_message(prompt)};
    std::string why;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto reply = gateway_.chat(ModelRole::judge_text, msgs, log_, attempt ? tag + ".fix" : tag);
        auto v = parse_indicators(reply.text);
        if (v && v->size() == expected) return *v;
        why = v ? fmt::format("expected {} indicators, got {}", expected, v->size()) : "not a JSON array of 0/1 values";
        msgs.push_back(llm::assistant_message(reply.text));
        msgs.push_back(llm::user_message(fmt::format("Your reply could not be used: {}. Reply with a JSON array of exactly "
                                                     "{} values, each 0 or 1.",
                                                     why, expected)));
    }
    throw EvaluationError(fmt::format("{}: {} after a re-prompt", tag, why));
}

IndicatorResult Judge::key_coverage(const std::string& gen, const std::vector<KeyPoint>& points, const std::string& question) {
    if (points.empty()) throw EvaluationError("no key points");
    auto ind = indicator_call(
        fmt::format("For each key point below, decide whether the report covers it (1) or not (0).\n\nQuestion: {}\n\n"
                    "Key points:\n{}\n<report>\n{}\n</report>\n\nReply with a JSON array of {} values, each 0 or 1, in "
                    "key point order.",
                    question, numbered_points(points, nullptr), gen, points.size()),
        points.size(), "eval.coverage");
    return {coverage_score(ind), ind};
}

std::vector<int> Judge::table_use(const std::string& gen, const std::vector<KeyPoint>& points,
                                  const std::map<std::string, std::string>& tables, const std::string& question) {
    if (points.empty()) throw EvaluationError("no key points");
    return indicator_call(
        fmt::format("For each key point below, decide whether the report supports it with evidence drawn from the named "
                    "table (1) or not (0).\n\nQuestion: {}\n\nKey points:\n{}\n<report>\n{}\n</report>\n\nReply with a "
                    "JSON array of {} values, each 0 or 1, in key point order.",
                    question, numbered_points(points, &tables), gen, points.size()),
        points.size(), "eval.table_use");
}

IndicatorResult Judge::key_supportiveness(const std::string& gen, const std::vector<KeyPoint>& points,
                                          const std::vector<int>& coverage,
                                          const std::map<std::string, std::string>& tables, const std::string& question) {
    auto use = table_use(gen, points, tables, question);
    return {supportiveness_score(coverage, use), use};
}

WinRateResult Judge::vision_win_rate(const std::vector<ComparedReport>& a, const std::vector<ComparedReport>& b,
                                     const std::string& agent_a, const std::string& agent_b, std::uint64_t seed) {
    if (a.size() != b.size()) throw ValidationError("vision", fmt::format("{} bundles for {} vs {} for {}", a.size(), agent_a, b.size(), agent_b));
    WinRateResult result;
    result.seed = seed;
    log_.info("eval.vision", fmt::format("presentation order seed {}", seed));
    std::mt19937_64 rng(seed);
    std::map<std::string, std::pair<int, int>> by_domain;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool swapped = (rng() & 1U) != 0;  // drawn for every pair so exclusions do not shift later draws
        const auto& qa = a[i];
        const auto& qb = b[i];
        if (qa.question_id != qb.question_id)
            throw ValidationError("vision", fmt::format("pair {} is not aligned: {} vs {}", i + 1, qa.question_id, qb.question_id));
        if (qa.pages.empty() || qb.pages.empty()) {
            const auto& why = qa.pages.empty() ? qa.compile_error : qb.compile_error;
            result.excluded.push_back({qa.question_id, why.empty() ? "no compiled pages" : why});
            log_.warn("eval.vision", fmt::format("{} excluded: {}", qa.question_id, result.excluded.back().reason));
            continue;
        }
        const auto& first = swapped ? qb : qa;
        const auto& second = swapped ? qa : qb;
        std::vector<std::filesystem::path> images = first.pages;
        images.insert(images.end(), second.pages.begin(), second.pages.end());
        const auto n1 = first.pages.size();
        std::string instruction = fmt::format(
            "Two research reports answering the same question were compiled to PDF. Images 1-{} are the pages of "
            "Report 1; images {}-{} are the pages of Report 2. Judge which report is better overall, considering "
            "content, figures, tables and presentation. Ties are not allowed: you must choose one.\n"
            "Reply with 'PREFER: 1' or 'PREFER: 2'.",
            n1, n1 + 1, images.size());
        std::optional<int> pref;
        for (int attempt = 0; attempt < 2 && !pref; ++attempt) {
            auto reply = gateway_.analyze_image(ModelRole::judge_vision, images, instruction, log_,
                                                attempt ? "eval.vision.fix" : "eval.vision");
            pref = parse_preference(reply.text);
            if (!pref) instruction += "\nYour previous reply could not be parsed. Reply with exactly 'PREFER: 1' or 'PREFER: 2'.";
        }
        if (!pref) throw EvaluationError(fmt::format("vision judge gave no preference for {} after a re-prompt", qa.question_id));
        const int shown_first_wins = *pref == 1 ? 1 : 0;
        const int indicator = swapped ? 1 - shown_first_wins : shown_first_wins;
        const auto domain = qa.domain.empty() ? qb.domain : qa.domain;
        result.records.push_back({qa.question_id, domain, agent_a, agent_b, indicator, swapped});
        auto& d = by_domain[domain];
        d.first += indicator;
        d.second += 1;
    }
    if (result.records.empty()) throw EvaluationError("every question was excluded from the vision comparison");
    std::vector<int> ind;
    for (const auto& r : result.records) ind.push_back(r.indicator);
    result.rate = win_rate(ind);
    for (const auto& [dom, c] : by_domain) result.per_domain[dom] = static_cast<double>(c.first) / c.second;
    return result;
}

}  // namespace strata::eval

#include "strata/eval/harness.hpp"

#include <fstream>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/eval/pdf.hpp"
#include "strata/writer/bundle.hpp"

namespace fs = std::filesystem;

namespace strata::eval {
namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError(p.string(), "cannot read");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void merge_json_file(const fs::path& path, const std::string& key, const nlohmann::json& value) {
    nlohmann::json doc = nlohmann::json::object();
    if (fs::exists(path)) {
        doc = writer::read_json_file(path);
        if (!doc.is_object()) doc = nlohmann::json::object();
    }
    doc[key] = value;
    writer::write_json_atomic(path, doc);
}

// Unweighted means of `columns` over all rows, then per domain.
nlohmann::json domain_rows(const std::vector<std::pair<std::string, std::map<std::string, double>>>& per_question,
                           const std::vector<std::string>& columns) {
    std::map<std::string, std::vector<const std::map<std::string, double>*>> by_domain;
    for (const auto& [dom, vals] : per_question) by_domain[dom].push_back(&vals);
    auto row = [&](const std::string& label, const std::vector<const std::map<std::string, double>*>& vals) {
        nlohmann::json r{{"label", label}, {"questions", vals.size()}};
        for (const auto& c : columns) {
            std::vector<double> xs;
            for (const auto* v : vals) xs.push_back(v->at(c));
            r[c] = mean(xs);
        }
        return r;
    };
    std::vector<const std::map<std::string, double>*> all;
    for (const auto& [_, v] : per_question) all.push_back(&v);
    nlohmann::json rows = nlohmann::json::array({row("all", all)});
    for (const auto& [dom, vals] : by_domain) rows.push_back(row(dom, vals));
    return {{"columns", columns}, {"rows", rows}};
}

const char* short_name(const std::string& dim) {
    if (dim == "Comprehensiveness") return "Comp.";
    if (dim == "Depth") return "Depth";
    if (dim == "Readability") return "Read.";
    if (dim == "Coherence") return "Coher.";
    return "?";
}

}  // namespace

BundleInput read_bundle(const fs::path& dir) {
    BundleInput b;
    b.dir = dir;
    const auto report = dir / writer::kReportFile;
    if (!fs::is_regular_file(report)) throw ValidationError(dir.string(), "not a report bundle (no report.md)");
    b.report = slurp(report);
    nlohmann::json meta = nlohmann::json::object();
    if (fs::exists(dir / writer::kMetaFile)) meta = writer::read_json_file(dir / writer::kMetaFile);
    b.question_id = meta.value("question_id", dir.filename().string());
    b.question = meta.value("question", std::string{});
    b.domain = meta.value("domain", std::string{});
    if (b.domain.empty()) b.domain = "unspecified";
    return b;
}

std::string read_reference(const fs::path& path) {
    if (fs::is_directory(path)) return read_bundle(path).report;
    return slurp(path);
}

nlohmann::json evaluate_race(Judge& judge, const std::vector<RaceItem>& items, const CriterionSet& criteria,
                             const fs::path& scores_dir) {
    if (items.empty()) throw ValidationError("race", "no bundles to evaluate");
    std::vector<std::string> columns{"Overall"};
    for (const auto& d : criteria.dimensions) columns.emplace_back(short_name(d.name));
    std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
    for (const auto& item : items) {
        auto sheet = judge.race_score(item.gen.report, item.reference, criteria, item.gen.question);
        merge_json_file(scores_dir / (item.gen.question_id + ".json"), "question_id", item.gen.question_id);
        merge_json_file(scores_dir / (item.gen.question_id + ".json"), "race", to_json(sheet));
        std::map<std::string, double> vals{{"Overall", sheet.overall}};
        for (const auto& d : sheet.dimensions) vals[short_name(d.name)] = d.gen;
        rows.emplace_back(item.gen.domain, std::move(vals));
    }
    auto agg = domain_rows(rows, columns);
    agg["scale"] = {criteria.score_min, criteria.score_max};
    merge_json_file(scores_dir / "summary.json", "race", agg);
    return agg;
}

nlohmann::json evaluate_knowledge(Judge& judge, const std::vector<BundleInput>& bundles, const fs::path& points_dir,
                                  const std::map<std::string, std::string>& table_descriptions, const fs::path& scores_dir) {
    if (bundles.empty()) throw ValidationError("knowledge", "no bundles to evaluate");
    // Every points file is checked before the first judge call.
    std::vector<KnowledgePointSet> points;
    for (const auto& b : bundles) points.push_back(load_points(points_dir / (b.question_id + ".json")));

    std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& b = bundles[i];
        const auto& p = points[i];
        const auto q = p.question.empty() ? b.question : p.question;
        const double main = judge.main_alignment(b.report, p.main_conclusion, q);
        const auto cov = judge.key_coverage(b.report, p.key_points, q);
        const auto sup = judge.key_supportiveness(b.report, p.key_points, cov.indicators, table_descriptions, q);
        const nlohmann::json entry{{"main_alignment", main},
                                   {"key_coverage", cov.score},
                                   {"coverage_indicators", cov.indicators},
                                   {"supportiveness", sup.score},
                                   {"table_use_indicators", sup.indicators}};
        merge_json_file(scores_dir / (b.question_id + ".json"), "question_id", b.question_id);
        merge_json_file(scores_dir / (b.question_id + ".json"), "knowledge", entry);
        rows.emplace_back(b.domain,
                          std::map<std::string, double>{{"Main.", main}, {"Key.", cov.score * 100}, {"Support.", sup.score * 100}});
    }
    auto agg = domain_rows(rows, {"Main.", "Key.", "Support."});
    merge_json_file(scores_dir / "summary.json", "knowledge", agg);
    return agg;
}

nlohmann::json evaluate_vision(Judge& judge, const std::vector<BundleInput>& a, const std::vector<BundleInput>& b,
                               const std::string& agent_a, const std::string& agent_b, std::uint64_t seed,
                               const fs::path& scores_dir) {
    if (a.size() != b.size())
        throw ValidationError("vision", fmt::format("{} bundles for {} but {} for {}", a.size(), agent_a, b.size(), agent_b));
    auto compile_all = [&](const std::vector<BundleInput>& in, const std::string& agent) {
        std::vector<ComparedReport> out;
        for (const auto& x : in) {
            ComparedReport r{x.question_id, x.domain, {}, {}};
            try {
                r.pages = compile_report(x.dir, scores_dir / "pdf" / agent / x.question_id).page_images;
            } catch (const CompileError& e) {
                r.compile_error = e.what();
            }
            out.push_back(std::move(r));
        }
        return out;
    };
    auto result = judge.vision_win_rate(compile_all(a, agent_a), compile_all(b, agent_b), agent_a, agent_b, seed);
    for (const auto& rec : result.records)
        merge_json_file(scores_dir / (rec.question_id + ".json"), "vision",
                        {{"agent_a", rec.agent_a}, {"agent_b", rec.agent_b}, {"indicator", rec.indicator}, {"swapped", rec.swapped}});
    nlohmann::json excluded = nlohmann::json::array();
    for (const auto& e : result.excluded) excluded.push_back({{"question_id", e.question_id}, {"reason", e.reason}});
    nlohmann::json agg{{"agent_a", agent_a},        {"agent_b", agent_b},         {"seed", seed},
                       {"questions", result.records.size()}, {"win_rate", result.rate}, {"per_domain", result.per_domain},
                       {"excluded", excluded}};
    merge_json_file(scores_dir / "summary.json", "vision", agg);
    return agg;
}

std::string render_summary(const std::string& mode, const nlohmann::json& agg) {
    std::string out;
    if (mode == "vision") {
        out += fmt::format("{} vs {}: win rate {:.3f} over {} question(s), seed {}\n", agg["agent_a"].get<std::string>(),
                           agg["agent_b"].get<std::string>(), agg["win_rate"].get<double>(), agg["questions"].get<std::size_t>(),
                           agg["seed"].get<std::uint64_t>());
        for (const auto& [dom, v] : agg["per_domain"].items()) out += fmt::format("  {:<22} {:.3f}\n", dom, v.get<double>());
        for (const auto& e : agg["excluded"])
            out += fmt::format("  excluded {}: {}\n", e["question_id"].get<std::string>(), e["reason"].get<std::string>());
        return out;
    }
    out += fmt::format("{:<22}", "domain");
    for (const auto& c : agg["columns"]) out += fmt::format(" {:>9}", c.get<std::string>());
    out += fmt::format(" {:>4}\n", "n");
    for (const auto& r : agg["rows"]) {
        out += fmt::format("{:<22}", r["label"].get<std::string>());
        for (const auto& c : agg["columns"]) {
            const double v = r[c.get<std::string>()].get<double>();
            out += mode == "race" && c == "Overall" ? fmt::format(" {:>9.3f}", v) : fmt::format(" {:>9.2f}", v);
        }
        out += fmt::format(" {:>4}\n", r["questions"].get<std::size_t>());
    }
    return out;
}

}  // namespace strata::eval

#include "strata/planner/research.hpp"

#include <chrono>
#include <ctime>
#include <set>

#include <fmt/format.h>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/writer/bundle.hpp"
#include "strata/writer/markdown.hpp"

namespace strata::planner {

namespace fs = std::filesystem;

std::string question_id_for(const std::string& text) { return "q-" + sha256_hex(text).substr(0, 12); }

namespace {

std::string iso_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Rewrites absolute paths under `root` to bundle-relative ones so two runs
// in different directories log identical exchanges.
void relativize(nlohmann::json& j, const std::string& root) {
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s.rfind(root, 0) == 0) j = s.substr(root.size());
    } else if (j.is_structured()) {
        for (auto& v : j) relativize(v, root);
    }
}

struct RunState {
    RunState(const ResearchQuestion& q, fs::path d) : question(q), dir(std::move(d)) {}

    const ResearchQuestion& question;
    fs::path dir;
    llm::ExchangeLog log;
    std::vector<Subtask> subtasks;
    std::vector<SupportingMaterial> materials;
    nlohmann::json steps = nlohmann::json::array();
    std::vector<writer::SubtaskResult> results;
    std::string started_at = iso_now();
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void persist(const std::string& status, const std::string& error, const std::string& report,
                 const nlohmann::json& extra, const llm::Gateway& gateway) {
        const auto root = dir.string() + "/";
        nlohmann::json exchanges{{"exchanges", log.exchanges_json()}, {"events", log.events_json()}};
        relativize(exchanges, root);
        nlohmann::json subtask_json = nlohmann::json::array();
        for (const auto& s : subtasks) subtask_json.push_back(to_json(s));
        nlohmann::json roles = nlohmann::json::object();
        for (auto role : llm::kAllRoles) {
            if (auto n = log.count(role); n > 0)
                roles[std::string(llm::to_string(role))] = {{"model", gateway.settings(role).model}, {"calls", n}};
        }
        nlohmann::json meta{{"question_id", question.id},
                            {"question", question.text},
                            {"status", status},
                            {"subtasks", subtask_json},
                            {"model_roles", roles},
                            {"timings",
                             {{"started_at", started_at},
                              {"finished_at", iso_now()},
                              {"total_ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()}}}};
        if (question.domain) meta["domain"] = *question.domain;
        if (!error.empty()) meta["error"] = error;
        meta.update(extra);
        auto steps_out = steps;
        relativize(steps_out, root);
        writer::write_json_atomic(dir / writer::kTrajectoryFile, steps_out);
        writer::write_json_atomic(dir / writer::kExchangesFile, exchanges);
        writer::write_json_atomic(dir / writer::kMetaFile, meta);
        if (!report.empty()) writer::write_file_atomic(dir / writer::kReportFile, report);
    }
};

nlohmann::json step_json(std::size_t index, const ToolCall& call, std::size_t first_exchange, std::size_t last_exchange) {
    nlohmann::json ids = nlohmann::json::array();
    for (auto i = first_exchange + 1; i <= last_exchange; ++i) ids.push_back(i);
    return {{"index", index},           {"subtask_id", call.subtask_id},
            {"tool_call", to_json(call)}, {"status", "ok"},
            {"material_ids", nlohmann::json::array()}, {"materials", nlohmann::json::array()},
            {"exchange_ids", ids}};
}

}  // namespace

ResearchEngine::ResearchEngine(llm::Gateway& gateway, const store::KnowledgeStore& store, uka::SearchClient& search,
                               uka::PageFetcher& fetcher, ska::Sandbox& sandbox, EngineOptions options)
    : gateway_(gateway), store_(store), search_(search), fetcher_(fetcher), sandbox_(sandbox), options_(std::move(options)) {}

RunResult ResearchEngine::run_research(const ResearchQuestion& question) {
    if (text::trim(question.text).empty()) throw PlanningError("research question is empty");
    RunState run{question, options_.output_dir / (question.id.empty() ? question_id_for(question.text) : question.id)};
    fs::remove_all(run.dir);
    fs::create_directories(run.dir / "assets");

    store::ChunkStore chunks(options_.chunking);
    Planner planner(gateway_, options_.planner);
    uka::UnstructuredAnalyzer uka(gateway_, search_, fetcher_, chunks, options_.uka);
    ska::StructuredAnalyzer ska(gateway_, store_, sandbox_, run.dir, options_.ska);
    writer::ReportWriter writer(gateway_, options_.writer);

    std::size_t step_index = 0;
    std::size_t step_start = 0;
    ToolCall current{ToolKind::finish, "", ""};
    try {
        run.subtasks = planner.decompose(question, run.log);
        std::vector<WrittenSummary> written;
        for (auto& subtask : run.subtasks) {
            subtask.advance(SubtaskStatus::researching);
            std::vector<std::size_t> mine;  // indices into run.materials
            int calls = 0;
            const auto history = build_history(written, options_.planner.history_token_budget);
            while (true) {
                step_start = run.log.size();
                PlannerState state{&question, &subtask, {}, history, calls};
                for (auto i : mine) state.materials.push_back(&run.materials[i]);
                current = planner.next_action(state, run.log);
                ++step_index;
                if (current.kind == ToolKind::write_subtask || current.kind == ToolKind::finish) {
                    std::vector<SupportingMaterial> input;
                    for (auto i : mine) input.push_back(run.materials[i]);
                    if (input.empty()) {
                        SupportingMaterial gap;
                        gap.id = fmt::format("M{}", run.materials.size() + 1);
                        gap.kind = MaterialKind::no_sources;
                        gap.subtask_id = subtask.id;
                        gap.query = subtask.title;
                        input.push_back(gap);
                    }
                    auto result = writer.write_subtask(subtask, input, chunks, run.log);
                    auto step = step_json(step_index, current, step_start, run.log.size());
                    step["result"] = writer::to_json(result);
                    run.steps.push_back(std::move(step));
                    subtask.advance(SubtaskStatus::written);
                    written.push_back({subtask.id, subtask.title, result.body});
                    run.results.push_back(std::move(result));
                    break;
                }
                ++calls;
                const auto material_id = fmt::format("M{}", run.materials.size() + 1);
                std::optional<SupportingMaterial> material;
                std::string soft_error;
                if (current.kind == ToolKind::uka) {
                    try {
                        material = uka.analyze(current.query, subtask, history, material_id, run.log);
                    } catch (const AnalyzerError& e) {
                        soft_error = e.what();
                        run.log.warn("uka", fmt::format("{}: {}", subtask.id, soft_error));
                    }
                } else {
                    material = ska.analyze({current.query, subtask.id}, material_id, run.log);
                }
                auto step = step_json(step_index, current, step_start, run.log.size());
                if (material) {
                    step["material_ids"].push_back(material->id);
                    step["materials"].push_back(to_json(*material));
                    run.materials.push_back(std::move(*material));
                    mine.push_back(run.materials.size() - 1);
                } else {
                    step["status"] = "failed";
                    step["error"] = soft_error;
                }
                run.steps.push_back(std::move(step));
            }
        }

        step_start = run.log.size();
        current = {ToolKind::finish, "", ""};
        ++step_index;
        auto report = writer.refine_report(run.results, question.text, run.log);
        auto step = step_json(step_index, current, step_start, run.log.size());
        step["refine_fallback"] = report.fallback;
        run.steps.push_back(std::move(step));

        std::set<std::string> local;
        nlohmann::json external = nlohmann::json::array();
        for (const auto& t : md::image_targets(report.markdown)) {
            if (t.rfind("http", 0) == 0) {
                if (std::find(external.begin(), external.end(), t) == external.end()) external.push_back(t);
            } else {
                local.insert(t);
            }
        }
        nlohmann::json drops = nlohmann::json::array();
        for (const auto& d : report.drops) drops.push_back(writer::to_json(d));
        fs::remove_all(run.dir / ".exec");
        run.persist("ok", "", report.markdown,
                    {{"external_figures", external},
                     {"figures_from_tables", local.size()},
                     {"drops", drops},
                     {"refine_fallback", report.fallback}},
                    gateway_);
        if (auto problems = writer::validate_bundle(run.dir); !problems.empty())
            throw WriterError("bundle invariants violated: " + text::join(problems, "; "));
        return {run.dir, run.steps.size(), local.size(), report.fallback};
    } catch (const RunAborted&) {
        throw;
    } catch (const Error& e) {
        // The step in flight: its tool call is known only if the planner got that far.
        auto step = step_json(run.steps.size() + 1, current, step_start, run.log.size());
        if (step_index != run.steps.size() + 1) step["tool_call"] = nullptr;
        step["status"] = "aborted";
        step["error"] = e.what();
        run.steps.push_back(std::move(step));
        run.log.warn("run", fmt::format("aborted: {}", e.what()));
        run.persist("aborted", e.what(), "", nlohmann::json::object(), gateway_);
        throw RunAborted(e.what(), (run.dir / writer::kTrajectoryFile).string());
    }
}

}  // namespace strata::planner

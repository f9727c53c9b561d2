#include "strata/planner/planner.hpp"

#include <algorithm>
#include <regex>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace strata::planner {

using llm::ModelRole;

std::string_view to_string(ToolKind k) noexcept {
    switch (k) {
        case ToolKind::uka: return "uka";
        case ToolKind::ska: return "ska";
        case ToolKind::write_subtask: return "write_subtask";
        case ToolKind::finish: return "finish";
    }
    return "uka";
}

nlohmann::json to_json(const ToolCall& c) {
    nlohmann::json j{{"kind", to_string(c.kind)}, {"query", c.query}, {"subtask_id", c.subtask_id}};
    if (c.forced) j["forced"] = true;
    return j;
}

ParsedDirective parse_directive(const std::string& reply) {
    static const std::regex kCall(R"(^[\s*`>_-]*CALL\s+([A-Za-z_]+)\s*:?\s*(.*?)[\s*`]*$)", std::regex::icase);
    for (const auto& line : text::split_lines(reply)) {
        std::smatch m;
        if (!std::regex_match(line, m, kCall)) continue;
        const auto tool = text::to_lower(m[1].str());
        const auto query = text::trim(m[2].str());
        ToolCall call;
        call.query = query;
        if (tool == "uka") call.kind = ToolKind::uka;
        else if (tool == "ska") call.kind = ToolKind::ska;
        else if (tool == "write_subtask" || tool == "finish" || tool == "done") call.kind = ToolKind::write_subtask;
        else return {std::nullopt, fmt::format("unknown tool '{}'", m[1].str())};
        if ((call.kind == ToolKind::uka || call.kind == ToolKind::ska) && query.empty())
            return {std::nullopt, fmt::format("CALL {} needs a query", tool)};
        return {call, ""};
    }
    const auto bare = text::to_lower(text::trim(reply));
    if (bare == "done" || bare == "done." || bare == "finish") return {ToolCall{ToolKind::write_subtask, "", ""}, ""};
    return {std::nullopt, "no CALL directive found"};
}

namespace {

std::string clean_title(std::string s) {
    s = text::trim(s);
    std::erase(s, '*');
    while (!s.empty() && (s.back() == ':' || s.back() == '.')) s.pop_back();
    return text::trim(s);
}

std::pair<std::string, std::string> split_title(const std::string& item) {
    for (const auto* sep : {": ", " - ", " – "}) {
        if (auto pos = item.find(sep); pos != std::string::npos && pos > 0)
            return {clean_title(item.substr(0, pos)), text::trim(item.substr(pos + std::string_view(sep).size()))};
    }
    return {clean_title(item), ""};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_subtask_list(const std::string& reply) {
    std::vector<std::pair<std::string, std::string>> out;
    if (auto j = text::extract_json(reply)) {
        const nlohmann::json* list = j->is_array() ? &*j : (j->is_object() && j->contains("subtasks") ? &(*j)["subtasks"] : nullptr);
        if (list && list->is_array()) {
            for (const auto& item : *list) {
                if (item.is_string()) {
                    out.push_back(split_title(item.get<std::string>()));
                } else if (item.is_object()) {
                    auto title = clean_title(item.value("title", ""));
                    if (!title.empty()) out.emplace_back(title, text::trim(item.value("description", "")));
                }
            }
            std::erase_if(out, [](const auto& p) { return p.first.empty(); });
            if (!out.empty()) return out;
        }
    }
    static const std::regex kItem(R"(^\s*(?:\d+[.)]|[-*])\s+(.+)$)");
    for (const auto& line : text::split_lines(reply)) {
        std::smatch m;
        if (!std::regex_match(line, m, kItem)) continue;
        auto item = split_title(m[1].str());
        if (!item.first.empty()) out.push_back(std::move(item));
    }
    return out;
}

Planner::Planner(llm::Gateway& gateway, PlannerOptions options) : gateway_(gateway), options_(options) {
    if (options_.min_subtasks < 1 || options_.max_subtasks < options_.min_subtasks)
        throw PlanningError("subtask bounds must satisfy 1 <= min <= max");
    if (options_.max_tool_calls_per_subtask < 1) throw PlanningError("tool-call budget must be positive");
}

std::vector<Subtask> Planner::decompose(const ResearchQuestion& question, llm::ExchangeLog& log) {
    if (text::trim(question.text).empty()) throw PlanningError("research question is empty");
    const auto prompt = fmt::format(
        "Decompose the research question below into a sequence of {} to {} fine-grained subtasks that together "
        "answer it. Each subtask needs a short title and a description of what to find out.\n"
        "Reply with a JSON array of objects {{\"title\": str, \"description\": str}}.\n\nQuestion: {}{}",
        options_.min_subtasks, options_.max_subtasks, question.text,
        question.domain ? fmt::format("\nDomain: {}", *question.domain) : "");

    std::vector<llm::Message> messages{llm::user_message(prompt)};
    std::vector<std::pair<std::string, std::string>> items;
    std::string problem;
    for (int round = 0; round < 3; ++round) {
        const auto reply = gateway_.chat(ModelRole::planner_chat, messages, log, "planner.decompose").text;
        items = parse_subtask_list(reply);
        if (static_cast<int>(items.size()) >= options_.min_subtasks) {
            problem.clear();
            break;
        }
        problem = items.empty() ? "no subtask list could be parsed"
                                : fmt::format("only {} subtask(s); at least {} are required", items.size(),
                                              options_.min_subtasks);
        log.warn("planner.decompose", problem);
        messages.push_back(llm::assistant_message(reply));
        messages.push_back(llm::user_message(fmt::format("{}. Reply with the JSON array only.", problem)));
    }
    if (!problem.empty()) throw PlanningError(fmt::format("decomposition failed after 2 re-prompts: {}", problem));
    if (static_cast<int>(items.size()) > options_.max_subtasks) {
        log.warn("planner.decompose", fmt::format("{} subtasks proposed; keeping the first {}", items.size(),
                                                  options_.max_subtasks));
        items.resize(static_cast<std::size_t>(options_.max_subtasks));
    }
    std::vector<Subtask> subtasks;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const int ordinal = static_cast<int>(i) + 1;
        subtasks.push_back({fmt::format("S{}", ordinal), items[i].first,
                            items[i].second.empty() ? items[i].first : items[i].second, SubtaskStatus::pending, ordinal});
    }
    return subtasks;
}

ToolCall Planner::next_action(const PlannerState& state, llm::ExchangeLog& log) {
    if (!state.subtask || state.subtask->status != SubtaskStatus::researching)
        throw PlanningError("next_action needs a subtask in research");
    const auto& subtask = *state.subtask;
    if (state.calls_made >= options_.max_tool_calls_per_subtask) {
        log.info("planner.budget", fmt::format("{}: {} tool calls used; writing the subtask", subtask.id, state.calls_made));
        return {ToolKind::write_subtask, "", subtask.id, true};
    }

    std::string gathered;
    for (const auto* m : state.materials) gathered += m->planner_view() + "\n";
    const auto prompt = fmt::format(
        "You are planning research for the question: {}\n\n"
        "Completed subtasks:\n{}\n\n"
        "Current subtask {}: {}\n{}\n\n"
        "Materials gathered for this subtask:\n{}\n"
        "Tool calls left for this subtask: {}\n"
        "Tools:\n- uka: search the web and summarize pages\n- ska: analyze the most relevant data table with code and "
        "figures\n- write_subtask: write up this subtask from the gathered materials\n\n"
        "Decide which knowledge source is needed now. Reply with exactly one line: CALL <tool>: <query>",
        state.question ? state.question->text : "", state.history.empty() ? "(none)" : state.history, subtask.id,
        subtask.title, subtask.description, gathered.empty() ? "(none)\n" : gathered,
        options_.max_tool_calls_per_subtask - state.calls_made);

    std::vector<llm::Message> messages{llm::user_message(prompt)};
    std::string problem;
    for (int round = 0; round < 2; ++round) {
        const auto reply = gateway_.chat(ModelRole::planner_chat, messages, log, "planner.next").text;
        auto parsed = parse_directive(reply);
        if (parsed.call && parsed.call->kind == ToolKind::write_subtask &&
            state.calls_made < options_.min_analyzer_calls_before_write) {
            parsed.call.reset();
            parsed.problem = fmt::format("write_subtask needs at least {} analyzer call(s) first",
                                         options_.min_analyzer_calls_before_write);
        }
        if (parsed.call) {
            parsed.call->subtask_id = subtask.id;
            return *parsed.call;
        }
        problem = parsed.problem;
        log.warn("planner.next", fmt::format("{}: {}", subtask.id, problem));
        messages.push_back(llm::assistant_message(reply));
        messages.push_back(llm::user_message(
            fmt::format("Invalid directive: {}. Reply with one line: CALL uka|ska|write_subtask: <query>", problem)));
    }
    throw PlanningError(fmt::format("{}: planner gave no valid tool call: {}", subtask.id, problem));
}

std::string build_history(const std::vector<WrittenSummary>& written, std::size_t token_budget) {
    std::vector<std::string> entries;
    std::size_t used = 0;
    std::size_t omitted = 0;
    for (auto it = written.rbegin(); it != written.rend(); ++it) {
        if (used >= token_budget) {
            ++omitted;
            continue;
        }
        std::string prose;
        for (const auto& line : text::split_lines(it->body)) {
            auto t = text::trim(line);
            if (t.empty() || t.front() == '#' || t.rfind("![", 0) == 0) continue;
            prose += (prose.empty() ? "" : " ") + t;
        }
        auto entry = fmt::format("{} {}: {}", it->subtask_id, it->title, prose);
        const auto cost = text::estimate_tokens(entry);
        if (used + cost > token_budget) entry = text::truncate_utf8(entry, (token_budget - used) * 4) + "...";
        used += text::estimate_tokens(entry);
        entries.insert(entries.begin(), std::move(entry));
    }
    if (omitted) entries.insert(entries.begin(), fmt::format("({} earlier subtask(s) omitted)", omitted));
    return text::join(entries, "\n");
}

}  // namespace strata::planner

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/core/material.hpp"
#include "strata/core/subtask.hpp"
#include "strata/llm/gateway.hpp"

namespace strata::planner {

struct PlannerOptions {
    int min_subtasks = 3;
    int max_subtasks = 8;
    int max_tool_calls_per_subtask = 6;
    int min_analyzer_calls_before_write = 1;
    std::size_t history_token_budget = 2000;
};

enum class ToolKind { uka, ska, write_subtask, finish };
std::string_view to_string(ToolKind k) noexcept;

struct ToolCall {
    ToolKind kind = ToolKind::uka;
    std::string query;
    std::string subtask_id;
    bool forced = false;  // issued by the budget rule, not the model
};

nlohmann::json to_json(const ToolCall& c);

// Result of reading one `CALL <tool>: <query>` directive.
struct ParsedDirective {
    std::optional<ToolCall> call;
    std::string problem;  // why there is no call
};
ParsedDirective parse_directive(const std::string& reply);

// Splits a decomposition reply (JSON list or numbered lines) into
// (title, description) pairs; empty when nothing usable was found.
std::vector<std::pair<std::string, std::string>> parse_subtask_list(const std::string& reply);

struct PlannerState {
    const ResearchQuestion* question = nullptr;
    const Subtask* subtask = nullptr;
    std::vector<const SupportingMaterial*> materials;  // current subtask, in order
    std::string history;                               // completed subtasks, already capped
    int calls_made = 0;                                // analyzer calls for this subtask
};

class Planner {
public:
    Planner(llm::Gateway& gateway, PlannerOptions options = {});

    std::vector<Subtask> decompose(const ResearchQuestion& question, llm::ExchangeLog& log);
    ToolCall next_action(const PlannerState& state, llm::ExchangeLog& log);

    const PlannerOptions& options() const noexcept { return options_; }

private:
    llm::Gateway& gateway_;
    PlannerOptions options_;
};

// Rolling summary of written subtasks, newest kept in full first, capped at
// `token_budget` estimated tokens.
struct WrittenSummary {
    std::string subtask_id;
    std::string title;
    std::string body;
};
std::string build_history(const std::vector<WrittenSummary>& written, std::size_t token_budget);

}  // namespace strata::planner

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "strata/planner/planner.hpp"
#include "strata/ska/analyzer.hpp"
#include "strata/store/knowledge_store.hpp"
#include "strata/uka/analyzer.hpp"
#include "strata/writer/writer.hpp"

namespace strata::planner {

struct EngineOptions {
    PlannerOptions planner;
    uka::UkaOptions uka;
    ska::SkaOptions ska;
    writer::WriterOptions writer;
    store::ChunkingOptions chunking;
    std::filesystem::path output_dir = "out";
};

struct RunResult {
    std::filesystem::path bundle_dir;
    std::size_t steps = 0;
    std::size_t figures_from_tables = 0;  // local figures referenced by report.md
    bool refine_fallback = false;
};

// One research run: decompose, loop over subtasks sequentially calling the
// analyzers, write each subtask, refine once, then persist the bundle.
// Any hard failure persists the partial trajectory and throws RunAborted.
class ResearchEngine {
public:
    ResearchEngine(llm::Gateway& gateway, const store::KnowledgeStore& store, uka::SearchClient& search,
                   uka::PageFetcher& fetcher, ska::Sandbox& sandbox, EngineOptions options);

    RunResult run_research(const ResearchQuestion& question);

private:
    llm::Gateway& gateway_;
    const store::KnowledgeStore& store_;
    uka::SearchClient& search_;
    uka::PageFetcher& fetcher_;
    ska::Sandbox& sandbox_;
    EngineOptions options_;
};

// Stable id for a literal question.
std::string question_id_for(const std::string& text);

}  // namespace strata::planner

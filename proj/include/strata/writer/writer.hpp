#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/core/material.hpp"
#include "strata/core/subtask.hpp"
#include "strata/llm/gateway.hpp"
#include "strata/store/chunk_store.hpp"

namespace strata::writer {

// A figure that did not make it into a body, and why.
struct DropRecord {
    std::string asset;
    std::string material_id;
    std::string stage;  // outline | fill | refine
    std::string reason;
};

struct OutlineSection {
    std::string heading;
    std::vector<std::string> materials;
    std::vector<std::string> slots;  // asset paths or web figure urls
};

struct Outline {
    std::string subtask_id;
    std::vector<OutlineSection> sections;
    std::vector<DropRecord> dropped;
};

struct SubtaskResult {
    std::string subtask_id;
    std::string title;
    std::string body;
    std::vector<std::string> citations;
    std::vector<DropRecord> drops;
    bool mechanical_insertion = false;
};

struct FinalReport {
    std::string markdown;
    std::vector<DropRecord> drops;
    bool fallback = false;  // refinement rejected; concatenated instead
    int refine_attempts = 0;
};

struct WriterOptions {
    std::size_t max_chunk_chars = 8000;  // raw page text offered to the fill prompt
    double max_refine_drop = 0.5;        // share of figures refinement may remove
};

nlohmann::json to_json(const DropRecord& d);
nlohmann::json to_json(const Outline& o);
nlohmann::json to_json(const SubtaskResult& r);

// Outline-then-fill for each subtask, then one refinement pass over the
// whole report. Figure placement is enforced mechanically when the model
// does not honour the outline.
class ReportWriter {
public:
    ReportWriter(llm::Gateway& gateway, WriterOptions options = {});

    Outline outline(const Subtask& subtask, const std::vector<SupportingMaterial>& materials, llm::ExchangeLog& log);
    SubtaskResult write_subtask(const Subtask& subtask, const std::vector<SupportingMaterial>& materials,
                                const store::ChunkStore& chunks, llm::ExchangeLog& log);
    FinalReport refine_report(const std::vector<SubtaskResult>& results, const std::string& question,
                              llm::ExchangeLog& log);

private:
    llm::Gateway& gateway_;
    WriterOptions options_;
};

// Deterministic concatenation used when refinement is rejected.
std::string concatenate_report(const std::vector<SubtaskResult>& results, const std::string& question);

}  // namespace strata::writer

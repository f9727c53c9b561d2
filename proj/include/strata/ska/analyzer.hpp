#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "strata/core/material.hpp"
#include "strata/core/subtask.hpp"
#include "strata/llm/gateway.hpp"
#include "strata/ska/sandbox.hpp"
#include "strata/store/knowledge_store.hpp"

namespace strata::ska {

struct SkaOptions {
    std::size_t top_k = 10;
    int max_code_retries = 3;
    int max_validation_retries = 3;
    int timeout_s = 60;
};

struct SkaQuery {
    std::string text;
    std::string subtask_id;
};

struct CodeArtifact {
    std::string source;
    std::string schema_comment;
    int attempt = 1;
    std::string prior_error;
    bool empty = false;  // the coder produced no program
};

struct Verdict {
    bool valid = false;
    std::string insight;  // when valid
    std::string reason;   // when not
    bool model_called = false;
};

// Table side of the research loop: pick one table, have the coder write
// analysis code against its schema only, run it with the payload injected,
// and keep the result once the vision model accepts it.
class StructuredAnalyzer {
public:
    // Executions and final assets live under work_dir; material asset paths
    // are relative to it (assets/<material>_<n>.png).
    StructuredAnalyzer(llm::Gateway& gateway, const store::KnowledgeStore& store, Sandbox& sandbox,
                       std::filesystem::path work_dir, SkaOptions options = {});

    store::TableRecord retrieve_table(const SkaQuery& query, llm::ExchangeLog& log);
    CodeArtifact generate_code(const store::TableRecord& table, const SkaQuery& query, int attempt,
                               const std::string& prior_error, llm::ExchangeLog& log);

    struct Execution {
        ExecutionResult result;
        CodeArtifact code;
        int attempts = 0;
    };
    // `feedback` carries the reason the previous accepted run was rejected.
    Execution execute_with_retry(const store::TableRecord& table, const SkaQuery& query, const std::string& material_id,
                                 const std::string& feedback, llm::ExchangeLog& log);
    Verdict analyze_result(const ExecutionResult& result, const SkaQuery& query, const store::TableRecord& table,
                           llm::ExchangeLog& log);

    SupportingMaterial analyze(const SkaQuery& query, std::string material_id, llm::ExchangeLog& log);

    const std::set<std::string>& used_tables() const noexcept { return used_; }
    const SkaOptions& options() const noexcept { return options_; }

private:
    std::filesystem::path data_file_for(const store::TableRecord& table);

    llm::Gateway& gateway_;
    const store::KnowledgeStore& store_;
    Sandbox& sandbox_;
    std::filesystem::path work_dir_;
    SkaOptions options_;
    std::set<std::string> used_;
    int execution_seq_ = 0;
};

// Parses "VALID: ..." / "REGENERATE: ..." replies; nullopt when neither.
std::optional<Verdict> parse_verdict(const std::string& reply);

}  // namespace strata::ska

#pragma once

#include <string>
#include <vector>

#include "strata/core/material.hpp"
#include "strata/core/subtask.hpp"
#include "strata/llm/gateway.hpp"
#include "strata/store/chunk_store.hpp"
#include "strata/uka/web.hpp"

namespace strata::uka {

struct UkaOptions {
    int max_results = 5;
    int fetch_concurrency = 4;
    std::size_t max_doc_chars = 6000;  // per page, in the summarization prompt
};

struct SearchIntent {
    std::string query;
    std::string intent;
    std::string subtask_id;
};

struct WebDocument {
    std::string url;
    std::string title;
    std::string markdown;  // empty unless ok
    bool ok = false;
    std::string error;
};

// Web side of the research loop: expand the query into an intent, search
// with the raw query, convert pages to markdown, summarize for the planner
// and keep the raw pages as chunks for the writer.
class UnstructuredAnalyzer {
public:
    UnstructuredAnalyzer(llm::Gateway& gateway, SearchClient& search, PageFetcher& fetcher,
                         store::ChunkStore& chunks, UkaOptions options = {});

    SearchIntent generate_intent(const std::string& query, const Subtask& subtask, const std::string& history,
                                 llm::ExchangeLog& log);
    std::vector<WebDocument> retrieve_pages(const std::string& query, const SearchIntent& intent, int max_results);
    SupportingMaterial summarize(const std::vector<WebDocument>& documents, const Subtask& subtask,
                                 const std::string& query, const SearchIntent& intent, std::string material_id,
                                 llm::ExchangeLog& log);

    SupportingMaterial analyze(const std::string& query, const Subtask& subtask, const std::string& history,
                               std::string material_id, llm::ExchangeLog& log);

private:
    llm::Gateway& gateway_;
    SearchClient& search_;
    PageFetcher& fetcher_;
    store::ChunkStore& chunks_;
    UkaOptions options_;
};

}  // namespace strata::uka

#include "strata/uka/analyzer.hpp"

#include <algorithm>
#include <future>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"
#include "strata/uka/html_to_markdown.hpp"

namespace strata::uka {

using llm::ModelRole;

UnstructuredAnalyzer::UnstructuredAnalyzer(llm::Gateway& gateway, SearchClient& search, PageFetcher& fetcher,
                                           store::ChunkStore& chunks, UkaOptions options)
    : gateway_(gateway), search_(search), fetcher_(fetcher), chunks_(chunks), options_(options) {}

SearchIntent UnstructuredAnalyzer::generate_intent(const std::string& query, const Subtask& subtask,
                                                   const std::string& history, llm::ExchangeLog& log) {
    if (text::trim(query).empty()) throw AnalyzerError("web query is empty");
    const auto prompt = fmt::format(
        "Expand the web research query below into a detailed search intent: what information to look for, "
        "which entities, periods, regions and figures matter for the current subtask.\n\n"
        "Subtask: {}\n{}\n\nResearch so far:\n{}\n\nQuery: {}\n\nReply with the search intent only.",
        subtask.title, subtask.description, history.empty() ? "(none)" : history, query);

    std::string intent;
    for (int attempt = 0; attempt < 2 && intent.empty(); ++attempt) {
        intent = text::trim(gateway_.chat(ModelRole::planner_chat, {llm::user_message(prompt)}, log, "uka.intent").text);
    }
    if (intent.empty()) {
        log.warn("uka.intent", fmt::format("empty intent twice for \"{}\"; using the raw query", query));
        intent = query;
    } else if (intent.size() <= query.size()) {
        log.warn("uka.intent", fmt::format("intent for \"{}\" is not longer than the query", query));
    }
    return {query, intent, subtask.id};
}

std::vector<WebDocument> UnstructuredAnalyzer::retrieve_pages(const std::string& query, const SearchIntent&,
                                                              int max_results) {
    auto hits = search_.search(query, max_results);
    if (static_cast<int>(hits.size()) > max_results) hits.resize(static_cast<std::size_t>(max_results));

    std::vector<WebDocument> docs(hits.size());
    const std::size_t fan_out = static_cast<std::size_t>(std::max(1, options_.fetch_concurrency));
    for (std::size_t begin = 0; begin < hits.size(); begin += fan_out) {
        const std::size_t end = std::min(hits.size(), begin + fan_out);
        std::vector<std::future<FetchResult>> pending;
        for (std::size_t i = begin; i < end; ++i)
            pending.push_back(std::async(std::launch::async, [this, url = hits[i].url] { return fetcher_.fetch(url); }));
        for (std::size_t i = begin; i < end; ++i) {
            auto result = pending[i - begin].get();
            auto& doc = docs[i];
            doc.url = hits[i].url;
            doc.title = hits[i].title;
            if (result.ok) {
                auto page = html_to_markdown(result.body);
                doc.ok = true;
                doc.markdown = std::move(page.markdown);
                if (!page.title.empty()) doc.title = page.title;
            } else {
                doc.error = result.error.empty() ? "fetch failed" : result.error;
            }
        }
    }
    return docs;
}

namespace {

std::vector<std::string> image_urls(const std::string& s) {
    static const std::regex kImage(R"(!\[[^\]]*\]\((https?://[^)\s]+)\))");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kImage); it != std::sregex_iterator(); ++it) {
        auto url = (*it)[1].str();
        if (std::find(out.begin(), out.end(), url) == out.end()) out.push_back(url);
    }
    return out;
}

}  // namespace

SupportingMaterial UnstructuredAnalyzer::summarize(const std::vector<WebDocument>& documents, const Subtask& subtask,
                                                   const std::string& query, const SearchIntent& intent,
                                                   std::string material_id, llm::ExchangeLog& log) {
    SupportingMaterial m;
    m.id = std::move(material_id);
    m.subtask_id = subtask.id;
    m.query = query;
    m.intent = intent.intent;

    std::vector<const WebDocument*> ok;
    for (const auto& d : documents)
        if (d.ok) ok.push_back(&d);
    if (ok.empty()) {
        m.kind = MaterialKind::no_sources;
        m.summary = "NO SOURCES: no web page could be retrieved for this query.";
        log.warn("uka.summarize", fmt::format("no usable sources for \"{}\"", query));
        return m;
    }

    for (const auto* d : ok) chunks_.store_chunks(d->url, subtask.id, d->markdown);

    std::string sources;
    for (std::size_t i = 0; i < ok.size(); ++i) {
        sources += fmt::format("\n### Source {}: {}\nTitle: {}\n\n{}\n", i + 1, ok[i]->url, ok[i]->title,
                               text::truncate_utf8(ok[i]->markdown, options_.max_doc_chars));
    }
    const auto prompt = fmt::format(
        "Summarize the web sources below for the research subtask. Keep key data, descriptions and conclusions "
        "relevant to the search intent. Cite figures worth showing as markdown images using their original url.\n"
        "End with a line 'Sources:' followed by the urls you used, one per line.\n\n"
        "Subtask: {}\n{}\nQuery: {}\nSearch intent: {}\n{}",
        subtask.title, subtask.description, query, intent.intent, sources);
    const auto reply = gateway_.chat(ModelRole::planner_chat, {llm::user_message(prompt)}, log, "uka.summarize").text;

    // Split the trailing "Sources:" block from the body.
    std::string body;
    std::string source_block;
    bool in_sources = false;
    for (const auto& line : text::split_lines(reply)) {
        auto t = text::trim(line);
        if (!in_sources && (text::starts_with_ci(t, "sources:") || text::starts_with_ci(t, "source:"))) {
            in_sources = true;
            source_block += t.substr(t.find(':') + 1) + "\n";
            continue;
        }
        (in_sources ? source_block : body) += line + "\n";
    }
    m.summary = text::trim(body);
    m.figure_urls.clear();

    std::set<std::string> fetched;
    for (const auto* d : ok) fetched.insert(d->url);
    const auto figures = image_urls(m.summary);
    if (in_sources) {
        m.cited_urls = text::extract_urls(source_block);
    } else {
        for (const auto& u : text::extract_urls(m.summary))
            if (std::find(figures.begin(), figures.end(), u) == figures.end()) m.cited_urls.push_back(u);
    }
    for (const auto& url : m.cited_urls) {
        if (!fetched.contains(url))
            throw ValidationError("uka.summarize", fmt::format("summary cites {} which was not fetched in this call", url));
    }
    for (const auto& fig : figures) {
        const bool seen = std::any_of(ok.begin(), ok.end(),
                                      [&](const WebDocument* d) { return d->markdown.find(fig) != std::string::npos; });
        if (seen) {
            m.figure_urls.push_back(fig);
            continue;
        }
        log.warn("uka.summarize", fmt::format("dropping figure {} that appears in no fetched page", fig));
        for (auto pos = m.summary.find("](" + fig + ")"); pos != std::string::npos;
             pos = m.summary.find("](" + fig + ")")) {
            auto open = m.summary.rfind("![", pos);
            if (open == std::string::npos) break;
            m.summary.erase(open, pos + fig.size() + 3 - open);
        }
    }
    m.kind = MaterialKind::text;
    return m;
}

SupportingMaterial UnstructuredAnalyzer::analyze(const std::string& query, const Subtask& subtask,
                                                 const std::string& history, std::string material_id,
                                                 llm::ExchangeLog& log) {
    auto intent = generate_intent(query, subtask, history, log);
    auto docs = retrieve_pages(query, intent, options_.max_results);
    for (const auto& d : docs)
        if (!d.ok) log.warn("uka.fetch", fmt::format("{}: {}", d.url, d.error));
    return summarize(docs, subtask, query, intent, std::move(material_id), log);
}

}  // namespace strata::uka

#include "strata/uka/web.hpp"

#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "strata/common/errors.hpp"
#include "strata/llm/http_backend.hpp"

namespace strata::uka {

using nlohmann::json;

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto parsed = llm::parse_base_url(url);
    std::string path = url.substr(parsed.scheme_host_port.size());
    if (path.empty()) path = "/";
    return {parsed.scheme_host_port, path};
}

}  // namespace

HttpSearchClient::HttpSearchClient(std::string endpoint, std::map<std::string, std::string> headers,
                                   std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), headers_(std::move(headers)), timeout_(timeout) {}

std::vector<SearchHit> HttpSearchClient::search(const std::string& query, int count) {
    auto [host, path] = split_url(endpoint_);
    httplib::Client client(host);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Headers headers(headers_.begin(), headers_.end());
    auto res = client.Post(path, headers, json{{"query", query}, {"q", query}, {"count", count}, {"num", count}}.dump(),
                           "application/json");
    if (!res) throw AnalyzerError("search request failed: " + httplib::to_string(res.error()));
    if (res->status >= 400) throw AnalyzerError("search returned HTTP " + std::to_string(res->status));
    auto body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw AnalyzerError("search response is not JSON");

    const json* items = nullptr;
    if (body.is_array()) items = &body;
    else if (body.contains("results")) items = &body["results"];
    else if (body.contains("organic")) items = &body["organic"];
    if (!items || !items->is_array()) throw AnalyzerError("search response has no result list");

    std::vector<SearchHit> hits;
    for (const auto& item : *items) {
        SearchHit h;
        h.url = item.value("url", item.value("link", std::string{}));
        h.title = item.value("title", std::string{});
        h.snippet = item.value("snippet", std::string{});
        if (!h.url.empty()) hits.push_back(std::move(h));
        if (static_cast<int>(hits.size()) >= count) break;
    }
    return hits;
}

HttpPageFetcher::HttpPageFetcher(std::chrono::seconds timeout) : timeout_(timeout) {}

FetchResult HttpPageFetcher::fetch(const std::string& url) {
    FetchResult out;
    try {
        auto [host, path] = split_url(url);
        httplib::Client client(host);
        client.set_follow_location(true);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        auto res = client.Get(path);
        if (!res) {
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.http_status = res->status;
        if (res->status < 200 || res->status >= 300) {
            out.error = "HTTP " + std::to_string(res->status);
            return out;
        }
        out.ok = true;
        out.body = std::move(res->body);
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

OfflineWeb::OfflineWeb(const nlohmann::json& recording) {
    const auto searches = recording.value("search", nlohmann::json::object());
    const auto pages = recording.value("pages", nlohmann::json::object());
    for (const auto& [query, hits] : searches.items()) {
        auto& out = search_[query];
        for (const auto& h : hits) out.push_back({h.at("url").get<std::string>(), h.value("title", ""), h.value("snippet", "")});
    }
    for (const auto& [url, html] : pages.items())
        pages_[url] = html.get<std::string>();
}

OfflineWeb OfflineWeb::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open web recording " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("web recording is not valid JSON: " + path.string());
    return OfflineWeb(j);
}

std::vector<SearchHit> OfflineWeb::search(const std::string& query, int count) {
    auto it = search_.find(query);
    if (it == search_.end()) return {};
    auto hits = it->second;
    if (count >= 0 && hits.size() > static_cast<std::size_t>(count)) hits.resize(static_cast<std::size_t>(count));
    return hits;
}

FetchResult OfflineWeb::fetch(const std::string& url) {
    auto it = pages_.find(url);
    if (it == pages_.end()) return {false, 404, "", "HTTP 404"};
    return {true, 200, it->second, ""};
}

}  // namespace strata::uka

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::uka {

struct SearchHit {
    std::string url;
    std::string title;
    std::string snippet;
};

class SearchClient {
public:
    virtual ~SearchClient() = default;
    virtual std::vector<SearchHit> search(const std::string& query, int count) = 0;
};

struct FetchResult {
    bool ok = false;
    int http_status = 0;
    std::string body;
    std::string error;
};

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    virtual FetchResult fetch(const std::string& url) = 0;
};

// JSON-over-HTTP search driver. POSTs {"query", "count"} to `endpoint` and
// accepts either {"results": [{url,title,snippet}]}, a bare array of those,
// or a Serper-style {"organic": [{link,title,snippet}]}.
class HttpSearchClient : public SearchClient {
public:
    HttpSearchClient(std::string endpoint, std::map<std::string, std::string> headers = {},
                     std::chrono::seconds timeout = std::chrono::seconds(30));
    std::vector<SearchHit> search(const std::string& query, int count) override;

private:
    std::string endpoint_;
    std::map<std::string, std::string> headers_;
    std::chrono::seconds timeout_;
};

// Plain GET with redirects followed. Non-2xx responses and transport
// failures come back as ok = false.
class HttpPageFetcher : public PageFetcher {
public:
    explicit HttpPageFetcher(std::chrono::seconds timeout = std::chrono::seconds(15));
    FetchResult fetch(const std::string& url) override;

private:
    std::chrono::seconds timeout_;
};

// Recorded web for offline runs:
// {"search": {"<query>": [{url,title,snippet}]}, "pages": {"<url>": "<html>"}}.
// Unknown queries return no hits; unknown urls fetch as 404.
class OfflineWeb : public SearchClient, public PageFetcher {
public:
    explicit OfflineWeb(const nlohmann::json& recording);
    static OfflineWeb from_file(const std::filesystem::path& path);

    std::vector<SearchHit> search(const std::string& query, int count) override;
    FetchResult fetch(const std::string& url) override;

private:
    std::map<std::string, std::vector<SearchHit>> search_;
    std::map<std::string, std::string> pages_;
};

}  // namespace strata::uka

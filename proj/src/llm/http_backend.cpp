#include "strata/llm/http_backend.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"

namespace strata::llm {

using nlohmann::json;

ParsedUrl parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint", "missing scheme in " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    out.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
    return out;
}

namespace {

std::string mime_for(const std::string& path) {
    auto ends = [&](std::string_view ext) { return path.size() >= ext.size() && path.ends_with(ext); };
    if (ends(".jpg") || ends(".jpeg")) return "image/jpeg";
    return "image/png";
}

json render_message(const Message& m) {
    if (m.images.empty()) return {{"role", m.role}, {"content", m.text}};
    auto parts = json::array();
    parts.push_back({{"type", "text"}, {"text", m.text}});
    for (const auto& img : m.images) {
        std::ifstream in(img.path, std::ios::binary);
        std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        parts.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:" + mime_for(img.path) + ";base64," + base64_encode(bytes)}}}});
    }
    return {{"role", m.role}, {"content", std::move(parts)}};
}

json post_json(const EndpointConfig& ep, const std::string& route, const json& body) {
    const auto url = parse_base_url(ep.endpoint);
    httplib::Client client(url.scheme_host_port);
    const auto secs = static_cast<time_t>(ep.timeout_s);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);

    auto res = client.Post(url.base_path + route, headers, body.dump(), "application/json");
    if (!res) throw TransportError(fmt::format("request to {} failed: {}", ep.endpoint, httplib::to_string(res.error())), 0, true);
    if (res->status >= 400) {
        const bool retryable = res->status >= 500;
        throw TransportError(fmt::format("{} returned HTTP {}: {}", ep.endpoint, res->status, res->body.substr(0, 300)),
                             res->status, retryable);
    }
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw TransportError("response body is not JSON", res->status, false);
    return parsed;
}

}  // namespace

HttpBackend::HttpBackend(std::map<ModelRole, EndpointConfig> endpoints) : endpoints_(std::move(endpoints)) {}

const EndpointConfig& HttpBackend::endpoint_for(ModelRole role) const {
    auto it = endpoints_.find(role);
    if (it == endpoints_.end() || it->second.endpoint.empty())
        throw ValidationError(std::string(to_string(role)), "no endpoint configured");
    return it->second;
}

ModelResponse HttpBackend::complete(const ModelRequest& request) {
    const auto& ep = endpoint_for(request.role);
    auto messages = json::array();
    for (const auto& m : request.messages) messages.push_back(render_message(m));
    json body{{"model", request.model},
              {"messages", std::move(messages)},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature}};
    const auto reply = post_json(ep, "/chat/completions", body);
    ModelResponse out;
    try {
        out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed chat response: ") + e.what(), 200, false);
    }
    if (reply.contains("usage")) {
        out.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
        out.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
    return out;
}

std::vector<std::vector<double>> HttpBackend::embed(const std::string& model, const std::vector<std::string>& texts) {
    const auto& ep = endpoint_for(ModelRole::embedder);
    const auto reply = post_json(ep, "/embeddings", {{"model", model}, {"input", texts}});
    std::vector<std::vector<double>> out(texts.size());
    try {
        for (const auto& item : reply.at("data")) {
            const auto index = item.value("index", std::size_t{0});
            if (index >= out.size()) throw TransportError("embedding index out of range", 200, false);
            out[index] = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed embedding response: ") + e.what(), 200, false);
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i].empty()) throw TransportError(fmt::format("no embedding returned for input {}", i), 200, false);
    return out;
}

}  // namespace strata::llm

#pragma once

#include <map>
#include <string>
#include <vector>

#include "strata/llm/backend.hpp"

namespace strata::llm {

struct EndpointConfig {
    std::string endpoint;  // base URL, e.g. https://api.example.com/v1
    std::string api_key;   // already resolved from the environment
    double timeout_s = 120.0;
};

// OpenAI-compatible chat/embeddings client. Images are sent inline as
// base64 data URLs.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(std::map<ModelRole, EndpointConfig> endpoints);

    ModelResponse complete(const ModelRequest& request) override;
    std::vector<std::vector<double>> embed(const std::string& model, const std::vector<std::string>& texts) override;

private:
    const EndpointConfig& endpoint_for(ModelRole role) const;

    std::map<ModelRole, EndpointConfig> endpoints_;
};

struct ParsedUrl {
    std::string scheme_host_port;
    std::string base_path;
};
ParsedUrl parse_base_url(const std::string& url);

}  // namespace strata::llm

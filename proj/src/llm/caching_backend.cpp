#include <fstream>

#include <nlohmann/json.hpp>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"
#include "strata/llm/backend.hpp"

namespace strata::llm {

namespace fs = std::filesystem;

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, fs::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

fs::path CachingBackend::entry_path(const ModelRequest& request) const {
    const auto key = sha256_hex(prompt_digest(request.messages) + "|" + std::string(to_string(request.role)) + "|" +
                                request.model);
    return dir_ / std::string(to_string(request.role)) / (key + ".json");
}

ModelResponse CachingBackend::complete(const ModelRequest& request) {
    const auto path = entry_path(request);
    if (fs::exists(path)) {
        std::ifstream in(path);
        auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("response") || !j["response"].is_string())
            throw JudgeCacheError(path.string(), "corrupt judge cache entry");
        if (j.value("prompt_digest", "") != prompt_digest(request.messages))
            throw JudgeCacheError(path.string(), "judge cache entry does not match its key");
        ++hits_;
        return {j["response"].get<std::string>(), j.value("prompt_tokens", 0), j.value("completion_tokens", 0)};
    }
    auto response = inner_->complete(request);
    ++misses_;
    fs::create_directories(path.parent_path());
    nlohmann::json entry{{"role", to_string(request.role)},
                         {"model", request.model},
                         {"prompt_digest", prompt_digest(request.messages)},
                         {"response", response.text},
                         {"prompt_tokens", response.prompt_tokens},
                         {"completion_tokens", response.completion_tokens}};
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << entry.dump(2) << "\n";
    }
    fs::rename(tmp, path);
    return response;
}

std::vector<std::vector<double>> CachingBackend::embed(const std::string& model, const std::vector<std::string>& texts) {
    return inner_->embed(model, texts);
}

}  // namespace strata::llm

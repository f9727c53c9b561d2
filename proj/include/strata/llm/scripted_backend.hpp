#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/llm/backend.hpp"

namespace strata::llm {

// One canned answer. The first rule (in file order) whose role matches and
// whose `contains` substring occurs in the flattened prompt answers the call.
// `times` uses are allowed; 0 means unlimited.
struct ScriptRule {
    ModelRole role = ModelRole::planner_chat;
    std::string contains;
    std::string response;
    int times = 1;
};

// Deterministic feature-hashing embedder over lowercase word tokens.
std::vector<double> hash_embedding(const std::string& text, std::size_t dim);

// Replays a script and fails on anything it does not cover.
class ScriptedBackend : public Backend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<ScriptRule> rules);

    // {"rules": [{"role", "contains", "response", "times"}],
    //  "embeddings": {"vectors": {"text": [..]}, "hash_dim": 64}}
    static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
    static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

    ScriptedBackend& add(ModelRole role, std::string contains, std::string response, int times = 1);
    ScriptedBackend& add_embedding(std::string text, std::vector<double> vector);
    ScriptedBackend& hash_embeddings(std::size_t dim);

    ModelResponse complete(const ModelRequest& request) override;
    std::vector<std::vector<double>> embed(const std::string& model, const std::vector<std::string>& texts) override;

    // Rules with uses left, excluding unlimited ones.
    std::size_t unconsumed() const;
    std::size_t calls() const;

private:
    struct Slot {
        ScriptRule rule;
        int used = 0;
    };
    mutable std::mutex mu_;
    std::vector<Slot> slots_;
    std::map<std::string, std::vector<double>> vectors_;
    std::optional<std::size_t> hash_dim_;
    std::size_t calls_ = 0;
};

}  // namespace strata::llm

#pragma once

#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/llm/types.hpp"

namespace strata::llm {

struct ModelExchange {
    std::size_t id = 0;
    ModelRole role = ModelRole::planner_chat;
    std::string model;
    std::string tag;  // which step issued the call, e.g. "ska.generate_code"
    std::vector<Message> prompt;
    std::string response;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    double latency_ms = 0.0;
    int attempt = 1;
};

struct LogEvent {
    std::string level;  // info | warn
    std::string scope;
    std::string message;
};

// Per-run record of model exchanges and notable events. Appends are
// serialized so a shared gateway can write from several threads.
class ExchangeLog {
public:
    std::size_t append(ModelExchange exchange);
    void event(std::string level, std::string scope, std::string message);
    void warn(std::string scope, std::string message) { event("warn", std::move(scope), std::move(message)); }
    void info(std::string scope, std::string message) { event("info", std::move(scope), std::move(message)); }

    std::vector<ModelExchange> exchanges() const;
    std::vector<LogEvent> events() const;
    std::size_t size() const;
    std::size_t count(ModelRole role) const;
    std::size_t count_tag(const std::string& tag) const;

    nlohmann::json exchanges_json() const;
    nlohmann::json events_json() const;

private:
    mutable std::mutex mu_;
    std::vector<ModelExchange> exchanges_;
    std::vector<LogEvent> events_;
};

nlohmann::json to_json(const ModelExchange& e);

// Replaces timing fields (latency_ms, *_ms, timestamps) with 0 recursively so
// two logs can be compared byte for byte.
nlohmann::json mask_timing(nlohmann::json j);

}  // namespace strata::llm

#include "strata/llm/exchange_log.hpp"

#include <algorithm>

namespace strata::llm {

std::size_t ExchangeLog::append(ModelExchange exchange) {
    std::lock_guard lock(mu_);
    exchange.id = exchanges_.size() + 1;
    exchanges_.push_back(std::move(exchange));
    return exchanges_.back().id;
}

void ExchangeLog::event(std::string level, std::string scope, std::string message) {
    std::lock_guard lock(mu_);
    events_.push_back({std::move(level), std::move(scope), std::move(message)});
}

std::vector<ModelExchange> ExchangeLog::exchanges() const {
    std::lock_guard lock(mu_);
    return exchanges_;
}

std::vector<LogEvent> ExchangeLog::events() const {
    std::lock_guard lock(mu_);
    return events_;
}

std::size_t ExchangeLog::size() const {
    std::lock_guard lock(mu_);
    return exchanges_.size();
}

std::size_t ExchangeLog::count(ModelRole role) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(exchanges_.begin(), exchanges_.end(), [&](const auto& e) { return e.role == role; }));
}

std::size_t ExchangeLog::count_tag(const std::string& tag) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(exchanges_.begin(), exchanges_.end(), [&](const auto& e) { return e.tag == tag; }));
}

nlohmann::json to_json(const ModelExchange& e) {
    auto prompt = nlohmann::json::array();
    for (const auto& m : e.prompt) prompt.push_back(to_json(m));
    return {{"id", e.id},
            {"role", to_string(e.role)},
            {"model", e.model},
            {"tag", e.tag},
            {"attempt", e.attempt},
            {"prompt", std::move(prompt)},
            {"response", e.response},
            {"prompt_tokens", e.prompt_tokens},
            {"completion_tokens", e.completion_tokens},
            {"latency_ms", e.latency_ms}};
}

nlohmann::json ExchangeLog::exchanges_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : exchanges()) arr.push_back(to_json(e));
    return arr;
}

nlohmann::json ExchangeLog::events_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : events()) arr.push_back({{"level", e.level}, {"scope", e.scope}, {"message", e.message}});
    return arr;
}

nlohmann::json mask_timing(nlohmann::json j) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& key = it.key();
            const bool timing = key == "latency_ms" || key == "timestamp" || key == "started_at" ||
                                key == "finished_at" || (key.size() > 3 && key.ends_with("_ms"));
            if (timing)
                it.value() = 0;
            else
                it.value() = mask_timing(std::move(it.value()));
        }
    } else if (j.is_array()) {
        for (auto& v : j) v = mask_timing(std::move(v));
    }
    return j;
}

}  // namespace strata::llm

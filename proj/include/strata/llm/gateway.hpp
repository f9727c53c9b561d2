#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "strata/llm/backend.hpp"
#include "strata/llm/exchange_log.hpp"
#include "strata/llm/types.hpp"

namespace strata::llm {

struct RoleSettings {
    std::string endpoint;
    std::string model = "scripted";
    std::string api_key_env;
    int max_tokens = 4096;
    double temperature = 0.0;
    double requests_per_minute = 0.0;  // 0 disables the limiter
};

RoleSettings default_settings(ModelRole role);

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_backoff{500};
};

struct GatewayConfig {
    std::map<ModelRole, RoleSettings> roles;
    RetryPolicy retry;
    std::size_t max_embed_chars = 32000;
};

struct Completion {
    std::string text;
    std::size_t exchange_id = 0;
    int attempt = 1;
};

// Every model call goes through here: role -> model mapping, retries,
// per-role rate limiting, and exchange logging.
class Gateway {
public:
    Gateway(GatewayConfig config, std::shared_ptr<Backend> backend);

    Completion chat(ModelRole role, std::vector<Message> messages, ExchangeLog& log, std::string_view tag = {});

    // Unit vectors, one per text. Logged as a single embedder exchange when
    // `log` is given.
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, ExchangeLog* log = nullptr,
                                           std::string_view tag = {});

    // Every image must exist and decode; this is checked before any call.
    Completion analyze_image(ModelRole role, const std::vector<std::filesystem::path>& images,
                             std::string instruction, ExchangeLog& log, std::string_view tag = {});

    const RoleSettings& settings(ModelRole role) const;
    const GatewayConfig& config() const noexcept { return config_; }

private:
    template <typename Fn>
    auto with_retries(ModelRole role, Fn&& fn, int& attempt_out) -> decltype(fn());
    void throttle(ModelRole role);

    GatewayConfig config_;
    std::shared_ptr<Backend> backend_;
    std::mutex limiter_mu_;
    std::map<ModelRole, std::chrono::steady_clock::time_point> next_slot_;
};

}  // namespace strata::llm

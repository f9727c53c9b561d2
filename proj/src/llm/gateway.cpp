#include "strata/llm/gateway.hpp"

#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"
#include "strata/common/image.hpp"
#include "strata/store/vector_index.hpp"

namespace strata::llm {

using Clock = std::chrono::steady_clock;

RoleSettings default_settings(ModelRole role) {
    RoleSettings s;
    switch (role) {
        case ModelRole::planner_chat:
        case ModelRole::writer_chat:
            s.temperature = 0.3;
            break;
        default:
            s.temperature = 0.0;
            break;
    }
    return s;
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
    for (auto role : kAllRoles)
        if (!config_.roles.contains(role)) config_.roles.emplace(role, default_settings(role));
}

const RoleSettings& Gateway::settings(ModelRole role) const { return config_.roles.at(role); }

void Gateway::throttle(ModelRole role) {
    const double rpm = settings(role).requests_per_minute;
    if (rpm <= 0.0) return;
    const auto interval = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(60.0 / rpm));
    Clock::time_point wait_until;
    {
        std::lock_guard lock(limiter_mu_);
        auto& next = next_slot_[role];
        const auto now = Clock::now();
        wait_until = std::max(next, now);
        next = wait_until + interval;
    }
    std::this_thread::sleep_until(wait_until);
}

template <typename Fn>
auto Gateway::with_retries(ModelRole role, Fn&& fn, int& attempt_out) -> decltype(fn()) {
    const int max_attempts = 1 + std::max(0, config_.retry.max_retries);
    for (int attempt = 1;; ++attempt) {
        throttle(role);
        try {
            attempt_out = attempt;
            return fn();
        } catch (const TransportError& e) {
            if (!e.retryable() || attempt >= max_attempts)
                throw GatewayError(fmt::format("{} call failed after {} attempt(s): {}", to_string(role), attempt, e.what()),
                                   attempt, e.status());
            const auto backoff = config_.retry.base_backoff * (1 << (attempt - 1));
            spdlog::warn("{} transport failure (attempt {}), retrying in {} ms: {}", to_string(role), attempt,
                         backoff.count(), e.what());
            std::this_thread::sleep_for(backoff);
        }
    }
}

Completion Gateway::chat(ModelRole role, std::vector<Message> messages, ExchangeLog& log, std::string_view tag) {
    if (messages.empty()) throw ValidationError(std::string(to_string(role)), "chat requires at least one message");
    const auto& s = settings(role);
    ModelRequest request{role, s.model, std::move(messages), s.max_tokens, s.temperature};

    int attempt = 1;
    const auto start = Clock::now();
    auto response = with_retries(role, [&] { return backend_->complete(request); }, attempt);
    const double latency = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    ModelExchange ex;
    ex.role = role;
    ex.model = s.model;
    ex.tag = std::string(tag);
    ex.prompt = std::move(request.messages);
    ex.response = response.text;
    ex.prompt_tokens = response.prompt_tokens;
    ex.completion_tokens = response.completion_tokens;
    ex.latency_ms = latency;
    ex.attempt = attempt;
    const auto id = log.append(std::move(ex));
    return {std::move(response.text), id, attempt};
}

std::vector<std::vector<double>> Gateway::embed(const std::vector<std::string>& texts, ExchangeLog* log,
                                                std::string_view tag) {
    if (texts.empty()) throw ValidationError("embedder", "embed requires at least one text");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].size() > config_.max_embed_chars)
            throw ValidationError("embedder", fmt::format("text at index {} exceeds {} characters", i, config_.max_embed_chars));
    }
    const auto& s = settings(ModelRole::embedder);
    int attempt = 1;
    const auto start = Clock::now();
    auto raw = with_retries(ModelRole::embedder, [&] { return backend_->embed(s.model, texts); }, attempt);
    const double latency = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    if (raw.size() != texts.size())
        throw GatewayError(fmt::format("embedder returned {} vectors for {} texts", raw.size(), texts.size()), attempt);

    std::vector<std::vector<double>> out;
    out.reserve(raw.size());
    for (const auto& v : raw) out.push_back(store::normalized(v));

    if (log) {
        ModelExchange ex;
        ex.role = ModelRole::embedder;
        ex.model = s.model;
        ex.tag = std::string(tag);
        for (const auto& t : texts) ex.prompt.push_back(user_message(t));
        ex.response = fmt::format("{} vector(s) of dimension {}", out.size(), out.empty() ? 0 : out.front().size());
        ex.latency_ms = latency;
        ex.attempt = attempt;
        log->append(std::move(ex));
    }
    return out;
}

Completion Gateway::analyze_image(ModelRole role, const std::vector<std::filesystem::path>& images,
                                  std::string instruction, ExchangeLog& log, std::string_view tag) {
    if (role != ModelRole::vision && role != ModelRole::judge_vision)
        throw ValidationError(std::string(to_string(role)), "analyze_image needs the vision or judge_vision role");
    if (images.empty()) throw ValidationError(std::string(to_string(role)), "analyze_image needs at least one image");
    Message m = user_message(std::move(instruction));
    for (const auto& path : images) {
        if (!is_decodable_image(path)) throw Error("unreadable image: " + path.string());
        m.images.push_back({path.string(), sha256_file(path)});
    }
    return chat(role, {std::move(m)}, log, tag);
}

}  // namespace strata::llm

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::llm {

enum class ModelRole { planner_chat, writer_chat, coder, vision, judge_text, judge_vision, embedder };

inline constexpr ModelRole kAllRoles[] = {ModelRole::planner_chat, ModelRole::writer_chat, ModelRole::coder,
                                          ModelRole::vision,       ModelRole::judge_text,  ModelRole::judge_vision,
                                          ModelRole::embedder};

std::string_view to_string(ModelRole role) noexcept;
std::optional<ModelRole> parse_role(std::string_view s);

struct ImageRef {
    std::string path;
    std::string digest;  // sha256 of the file bytes
};

struct Message {
    std::string role = "user";  // system | user | assistant
    std::string text;
    std::vector<ImageRef> images;
};

inline Message system_message(std::string text) { return {"system", std::move(text), {}}; }
inline Message user_message(std::string text) { return {"user", std::move(text), {}}; }
inline Message assistant_message(std::string text) { return {"assistant", std::move(text), {}}; }

struct ModelRequest {
    ModelRole role = ModelRole::planner_chat;
    std::string model;
    std::vector<Message> messages;
    int max_tokens = 4096;
    double temperature = 0.0;
};

struct ModelResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

// Concatenated message text, the string scripted rules match against.
std::string flatten_prompt(const std::vector<Message>& messages);
// Stable digest of role-tagged message text and image digests.
std::string prompt_digest(const std::vector<Message>& messages);

nlohmann::json to_json(const Message& m);
Message message_from_json(const nlohmann::json& j);

}  // namespace strata::llm

#include "strata/llm/types.hpp"

#include <array>

#include "strata/common/digest.hpp"
#include "strata/common/text.hpp"

namespace strata::llm {

namespace {
constexpr std::array<std::string_view, 7> kRoleNames{"planner_chat", "writer_chat", "coder",       "vision",
                                                     "judge_text",   "judge_vision", "embedder"};
}

std::string_view to_string(ModelRole role) noexcept { return kRoleNames[static_cast<std::size_t>(role)]; }

std::optional<ModelRole> parse_role(std::string_view s) {
    const auto needle = text::trim(s);
    for (std::size_t i = 0; i < kRoleNames.size(); ++i)
        if (needle == kRoleNames[i]) return static_cast<ModelRole>(i);
    return std::nullopt;
}

std::string flatten_prompt(const std::vector<Message>& messages) {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += "\n";
        out += m.text;
    }
    return out;
}

nlohmann::json to_json(const Message& m) {
    nlohmann::json j{{"role", m.role}, {"text", m.text}};
    if (!m.images.empty()) {
        auto imgs = nlohmann::json::array();
        for (const auto& i : m.images) imgs.push_back({{"path", i.path}, {"digest", i.digest}});
        j["images"] = std::move(imgs);
    }
    return j;
}

Message message_from_json(const nlohmann::json& j) {
    Message m;
    m.role = j.value("role", std::string("user"));
    m.text = j.value("text", std::string{});
    if (j.contains("images")) {
        for (const auto& i : j["images"]) m.images.push_back({i.value("path", ""), i.value("digest", "")});
    }
    return m;
}

std::string prompt_digest(const std::vector<Message>& messages) {
    auto arr = nlohmann::json::array();
    for (const auto& m : messages) {
        nlohmann::json j{{"role", m.role}, {"text", m.text}};
        auto imgs = nlohmann::json::array();
        for (const auto& i : m.images) imgs.push_back(i.digest);
        j["images"] = std::move(imgs);
        arr.push_back(std::move(j));
    }
    return sha256_hex(arr.dump());
}

}  // namespace strata::llm

#include "strata/llm/scripted_backend.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace strata::llm {

std::vector<double> hash_embedding(const std::string& text, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const auto h = fnv1a64(token);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % dim] += sign;
        token.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c))
            token += static_cast<char>(std::tolower(c));
        else
            flush();
    }
    flush();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) v[0] = 1.0;  // empty text still maps to a unit vector
    return v;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules) {
    for (auto& r : rules) slots_.push_back({std::move(r), 0});
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script) {
    auto out = std::make_shared<ScriptedBackend>();
    auto& b = *out;
    if (script.contains("rules")) {
        for (const auto& r : script.at("rules")) {
            const auto role_name = r.at("role").get<std::string>();
            auto role = parse_role(role_name);
            if (!role) throw ValidationError("script", "unknown role " + role_name);
            b.add(*role, r.value("contains", std::string{}), r.at("response").get<std::string>(), r.value("times", 1));
        }
    }
    if (script.contains("embeddings")) {
        const auto& e = script.at("embeddings");
        if (e.contains("vectors"))
            for (const auto& [text, vec] : e.at("vectors").items()) b.add_embedding(text, vec.get<std::vector<double>>());
        if (e.contains("hash_dim")) b.hash_embeddings(e.at("hash_dim").get<std::size_t>());
    }
    return out;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open script " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("script is not valid JSON: " + path.string());
    return from_json(j);
}

ScriptedBackend& ScriptedBackend::add(ModelRole role, std::string contains, std::string response, int times) {
    std::lock_guard lock(mu_);
    slots_.push_back({{role, std::move(contains), std::move(response), times}, 0});
    return *this;
}

ScriptedBackend& ScriptedBackend::add_embedding(std::string text, std::vector<double> vector) {
    std::lock_guard lock(mu_);
    vectors_[std::move(text)] = std::move(vector);
    return *this;
}

ScriptedBackend& ScriptedBackend::hash_embeddings(std::size_t dim) {
    std::lock_guard lock(mu_);
    hash_dim_ = dim;
    return *this;
}

ModelResponse ScriptedBackend::complete(const ModelRequest& request) {
    const auto prompt = flatten_prompt(request.messages);
    std::lock_guard lock(mu_);
    ++calls_;
    for (auto& slot : slots_) {
        if (slot.rule.role != request.role) continue;
        if (slot.rule.times > 0 && slot.used >= slot.rule.times) continue;
        if (prompt.find(slot.rule.contains) == std::string::npos) continue;
        ++slot.used;
        return {slot.rule.response, static_cast<int>(text::estimate_tokens(prompt)),
                static_cast<int>(text::estimate_tokens(slot.rule.response))};
    }
    const auto digest = prompt_digest(request.messages);
    throw ReplayError(fmt::format("no scripted response for role {} (prompt digest {}): {}", to_string(request.role),
                                  digest.substr(0, 16), text::truncate_utf8(prompt, 200)),
                      digest);
}

std::vector<std::vector<double>> ScriptedBackend::embed(const std::string&, const std::vector<std::string>& texts) {
    std::lock_guard lock(mu_);
    ++calls_;
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        if (auto it = vectors_.find(t); it != vectors_.end()) {
            out.push_back(it->second);
        } else if (hash_dim_) {
            out.push_back(hash_embedding(t, *hash_dim_));
        } else {
            throw ReplayError("no scripted embedding for: " + text::truncate_utf8(t, 120), sha256_hex(t));
        }
    }
    return out;
}

std::size_t ScriptedBackend::unconsumed() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& s : slots_)
        if (s.rule.times > 0 && s.used < s.rule.times) ++n;
    return n;
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

}  // namespace strata::llm

#include "strata/common/text.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_set>

namespace strata::text {

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < s.size()) out.emplace_back(s.substr(start));
            break;
        }
        std::string line(s.substr(start, nl - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(std::move(line));
        start = nl + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::size_t utf8_boundary_at_or_before(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return s.size();
    while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
    return pos;
}

std::string truncate_utf8(std::string_view s, std::size_t max_bytes) {
    if (s.size() <= max_bytes) return std::string(s);
    return std::string(s.substr(0, utf8_boundary_at_or_before(s, max_bytes)));
}

std::vector<std::string> extract_urls(std::string_view s) {
    static const std::regex kUrl(R"(https?://[^\s<>()\[\]"'`]+)");
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    std::string str(s);
    for (auto it = std::sregex_iterator(str.begin(), str.end(), kUrl); it != std::sregex_iterator(); ++it) {
        std::string url = it->str();
        while (!url.empty() && std::string_view(".,;:!?").find(url.back()) != std::string_view::npos)
            url.pop_back();
        if (seen.insert(url).second) out.push_back(url);
    }
    return out;
}

std::optional<std::string> extract_fenced(std::string_view s, const std::vector<std::string>& langs) {
    std::size_t pos = 0;
    while ((pos = s.find("```", pos)) != std::string_view::npos) {
        auto eol = s.find('\n', pos);
        if (eol == std::string_view::npos) return std::nullopt;
        std::string tag = to_lower(trim(s.substr(pos + 3, eol - pos - 3)));
        auto close = s.find("```", eol + 1);
        if (close == std::string_view::npos) close = s.size();
        bool accepted = langs.empty() || tag.empty() ||
                        std::find(langs.begin(), langs.end(), tag) != langs.end();
        if (accepted) return std::string(s.substr(eol + 1, close - eol - 1));
        if (close == s.size()) return std::nullopt;
        pos = close + 3;
    }
    return std::nullopt;
}

std::optional<nlohmann::json> extract_json(std::string_view s) {
    if (auto fenced = extract_fenced(s, {"json"})) {
        auto parsed = nlohmann::json::parse(*fenced, nullptr, false);
        if (!parsed.is_discarded()) return parsed;
    }
    auto whole = nlohmann::json::parse(s, nullptr, false);
    if (!whole.is_discarded()) return whole;
    // Try each opening bracket against the last matching closer.
    for (std::size_t i = 0; i < s.size(); ++i) {
        char open = s[i];
        if (open != '{' && open != '[') continue;
        char close = open == '{' ? '}' : ']';
        auto end = s.rfind(close);
        if (end == std::string_view::npos || end < i) continue;
        auto parsed = nlohmann::json::parse(s.substr(i, end - i + 1), nullptr, false);
        if (!parsed.is_discarded()) return parsed;
    }
    return std::nullopt;
}

}  // namespace strata::text

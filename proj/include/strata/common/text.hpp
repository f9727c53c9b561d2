#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Truncates to at most max_bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view s, std::size_t max_bytes);
std::size_t utf8_boundary_at_or_before(std::string_view s, std::size_t pos);

// Rough token estimate used for budgets (4 bytes per token).
inline std::size_t estimate_tokens(std::string_view s) { return (s.size() + 3) / 4; }

// All http(s) URLs in order of first appearance, deduplicated.
std::vector<std::string> extract_urls(std::string_view s);

// Body of the first fenced block tagged with one of `langs` (or untagged when
// langs is empty); nullopt when there is no fence.
std::optional<std::string> extract_fenced(std::string_view s, const std::vector<std::string>& langs = {});

// Parses the first JSON value found in model output, tolerating code fences
// and surrounding prose.
std::optional<nlohmann::json> extract_json(std::string_view s);

}  // namespace strata::text

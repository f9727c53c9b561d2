#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace strata {

struct ResearchQuestion {
    std::string id;
    std::string text;
    std::optional<std::string> domain;
};

enum class SubtaskStatus { pending, researching, written };

std::string_view to_string(SubtaskStatus s) noexcept;

struct Subtask {
    std::string id;  // "S<ordinal>"
    std::string title;
    std::string description;
    SubtaskStatus status = SubtaskStatus::pending;
    int ordinal = 0;

    // Forward-only: pending -> researching -> written. Throws otherwise.
    void advance(SubtaskStatus next);
};

nlohmann::json to_json(const Subtask& s);
nlohmann::json to_json(const ResearchQuestion& q);

}  // namespace strata

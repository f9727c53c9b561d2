#include "strata/core/subtask.hpp"

#include <fmt/format.h>

#include "strata/common/errors.hpp"

namespace strata {

std::string_view to_string(SubtaskStatus s) noexcept {
    switch (s) {
        case SubtaskStatus::pending: return "pending";
        case SubtaskStatus::researching: return "researching";
        case SubtaskStatus::written: return "written";
    }
    return "pending";
}

void Subtask::advance(SubtaskStatus next) {
    const bool ok = (status == SubtaskStatus::pending && next == SubtaskStatus::researching) ||
                    (status == SubtaskStatus::researching && next == SubtaskStatus::written);
    if (!ok)
        throw PlanningError(fmt::format("subtask {} cannot move from {} to {}", id, to_string(status), to_string(next)));
    status = next;
}

nlohmann::json to_json(const Subtask& s) {
    return {{"id", s.id},
            {"ordinal", s.ordinal},
            {"title", s.title},
            {"description", s.description},
            {"status", to_string(s.status)}};
}

nlohmann::json to_json(const ResearchQuestion& q) {
    nlohmann::json j{{"id", q.id}, {"text", q.text}};
    if (q.domain) j["domain"] = *q.domain;
    return j;
}

}  // namespace strata

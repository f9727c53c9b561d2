#include "strata/common/errors.hpp"

#include <fmt/format.h>

namespace strata {

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t got)
    : Error(fmt::format("vector dimension mismatch: store has {}, query has {}", expected, got)) {}

namespace {
std::string render(const std::vector<std::string>& diagnostics) {
    std::string out = "invalid configuration";
    for (const auto& d : diagnostics) {
        out += "\n  ";
        out += d;
    }
    return out;
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : Error(render(diagnostics)), diagnostics_(std::move(diagnostics)) {}

}  // namespace strata

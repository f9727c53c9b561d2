#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::writer {

// Bundle layout: report.md, assets/, trajectory.json, exchanges.json, meta.json.
inline constexpr std::string_view kReportFile = "report.md";
inline constexpr std::string_view kTrajectoryFile = "trajectory.json";
inline constexpr std::string_view kExchangesFile = "exchanges.json";
inline constexpr std::string_view kMetaFile = "meta.json";

// Write to a sibling temp file, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Every broken bundle invariant, as readable messages; empty when valid.
// Image references must resolve to a decodable file inside the bundle or to
// an url listed under meta.json "external_figures".
std::vector<std::string> validate_bundle(const std::filesystem::path& dir);

}  // namespace strata::writer

#include "strata/writer/bundle.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/image.hpp"
#include "strata/writer/markdown.hpp"

namespace strata::writer {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    }
    fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", path.string()));
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(fmt::format("{} is not valid JSON", path.string()));
    return j;
}

std::vector<std::string> validate_bundle(const fs::path& dir) {
    std::vector<std::string> problems;
    for (auto name : {kReportFile, kTrajectoryFile, kMetaFile}) {
        if (!fs::is_regular_file(dir / name)) problems.push_back(fmt::format("missing {}", name));
    }
    if (!problems.empty()) return problems;

    std::ifstream in(dir / kReportFile, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto report = ss.str();
    if (report.find_first_not_of(" \t\r\n") == std::string::npos) problems.push_back("report.md is empty");

    std::set<std::string> external;
    try {
        const auto meta = read_json_file(dir / kMetaFile);
        for (const auto& u : meta.value("external_figures", nlohmann::json::array())) external.insert(u.get<std::string>());
        const auto trajectory = read_json_file(dir / kTrajectoryFile);
        if (!trajectory.is_array()) problems.push_back("trajectory.json is not an array of steps");
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }

    const auto root = fs::weakly_canonical(dir);
    for (const auto& target : md::image_targets(report)) {
        if (target.rfind("http://", 0) == 0 || target.rfind("https://", 0) == 0) {
            if (!external.contains(target)) problems.push_back(fmt::format("external figure {} not recorded in meta.json", target));
            continue;
        }
        const auto path = fs::weakly_canonical(dir / target);
        const auto rel = path.lexically_relative(root);
        if (rel.empty() || *rel.begin() == "..") {
            problems.push_back(fmt::format("{} points outside the bundle", target));
        } else if (!fs::is_regular_file(path)) {
            problems.push_back(fmt::format("{} does not exist", target));
        } else if (!is_decodable_image(path)) {
            problems.push_back(fmt::format("{} is not a readable image", target));
        }
    }
    return problems;
}

}  // namespace strata::writer

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::ska {

// The request file handed to the runner. The runner binds the records in
// data_file to the variable named there, exposes asset_dir as ASSET_DIR and
// executes `code` with a headless plotting backend.
struct SandboxRequest {
    std::string code;
    std::filesystem::path data_file;
    std::filesystem::path asset_dir;
    int timeout_s = 60;
};

nlohmann::json to_json(const SandboxRequest& r);

enum class ExecStatus { ok, runtime_error, timeout };
std::string_view to_string(ExecStatus s) noexcept;

struct ExecutionResult {
    ExecStatus status = ExecStatus::runtime_error;
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
    std::vector<std::filesystem::path> assets;  // files in asset_dir, sorted; empty unless ok
    double wall_ms = 0.0;
};

class Sandbox {
public:
    virtual ~Sandbox() = default;
    // asset_dir must exist and be empty.
    virtual ExecutionResult run(const SandboxRequest& request) = 0;
};

// Runs `<command...> <request.json>` as a child process. The runner enforces
// the timeout itself; the child is also killed after timeout + grace so a
// wedged runner cannot stall the run.
class SubprocessSandbox : public Sandbox {
public:
    explicit SubprocessSandbox(std::vector<std::string> command, int grace_s = 5);
    ExecutionResult run(const SandboxRequest& request) override;

private:
    std::vector<std::string> command_;
    int grace_s_;
};

// Offline stand-in: the first rule whose `contains` occurs in the code
// decides the outcome. Figures are rendered as small bar charts.
struct SandboxRule {
    std::string contains;
    int exit_code = 0;
    std::string stdout_text;
    std::string stderr_text;
    int figures = 0;
    bool timeout = false;
    int times = 0;  // 0 = unlimited
};

class ScriptedSandbox : public Sandbox {
public:
    ScriptedSandbox() = default;
    explicit ScriptedSandbox(std::vector<SandboxRule> rules);
    static std::shared_ptr<ScriptedSandbox> from_json(const nlohmann::json& j);

    void add(SandboxRule rule);
    ExecutionResult run(const SandboxRequest& request) override;
    std::vector<SandboxRequest> requests() const;

private:
    struct Slot {
        SandboxRule rule;
        int used = 0;
    };
    mutable std::mutex mu_;
    std::vector<Slot> rules_;
    std::vector<SandboxRequest> requests_;
};

// Writes a deterministic bar-chart PNG; shared with other offline fakes.
void render_placeholder_chart(const std::filesystem::path& path, int variant);

// Markdown tables printed between <<TABLE>> and <</TABLE>> lines.
std::vector<std::string> extract_tables(const std::string& stdout_text);
// stdout with the sentinel lines themselves removed.
std::string strip_table_sentinels(const std::string& stdout_text);

}  // namespace strata::ska

#include "strata/ska/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace strata::ska {

namespace fs = std::filesystem;

nlohmann::json to_json(const SandboxRequest& r) {
    return {{"code", r.code},
            {"data_file", r.data_file.string()},
            {"asset_dir", r.asset_dir.string()},
            {"timeout_s", r.timeout_s}};
}

std::string_view to_string(ExecStatus s) noexcept {
    switch (s) {
        case ExecStatus::ok: return "ok";
        case ExecStatus::runtime_error: return "runtime_error";
        case ExecStatus::timeout: return "timeout";
    }
    return "runtime_error";
}

namespace {

std::vector<fs::path> list_assets(const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void check_request(const SandboxRequest& r) {
    if (r.timeout_s <= 0) throw AnalyzerError("sandbox timeout must be positive");
    if (!fs::is_directory(r.asset_dir)) throw AnalyzerError(fmt::format("asset dir {} does not exist", r.asset_dir.string()));
    if (!fs::is_empty(r.asset_dir)) throw AnalyzerError(fmt::format("asset dir {} is not empty", r.asset_dir.string()));
}

}  // namespace

SubprocessSandbox::SubprocessSandbox(std::vector<std::string> command, int grace_s)
    : command_(std::move(command)), grace_s_(grace_s) {
    if (command_.empty()) throw AnalyzerError("sandbox runner command is empty");
}

ExecutionResult SubprocessSandbox::run(const SandboxRequest& request) {
    check_request(request);
    const auto request_file = request.asset_dir.parent_path() / "request.json";
    {
        std::ofstream out(request_file, std::ios::binary | std::ios::trunc);
        out << to_json(request).dump(2);
        if (!out) throw AnalyzerError(fmt::format("cannot write {}", request_file.string()));
    }

    int out_pipe[2];
    int err_pipe[2];
    if (pipe2(out_pipe, O_CLOEXEC) != 0 || pipe2(err_pipe, O_CLOEXEC) != 0)
        throw AnalyzerError("cannot create sandbox pipes");

    std::vector<std::string> args = command_;
    args.push_back(request_file.string());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    const auto started = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) throw AnalyzerError("fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        execvp(argv[0], argv.data());
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);

    ExecutionResult result;
    const auto deadline = started + std::chrono::seconds(request.timeout_s + grace_s_);
    bool killed = false;
    std::array<pollfd, 2> fds{pollfd{out_pipe[0], POLLIN, 0}, pollfd{err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    std::array<char, 4096> buf{};
    while (open_fds > 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            kill(-pid, SIGKILL);
            killed = true;
            break;
        }
        if (poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(left.count(), 200))) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (std::size_t i = 0; i < fds.size(); ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const auto n = read(fds[i].fd, buf.data(), buf.size());
            if (n > 0) {
                (i == 0 ? result.stdout_text : result.stderr_text).append(buf.data(), static_cast<std::size_t>(n));
            } else {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    for (auto& f : fds)
        if (f.fd >= 0) close(f.fd);

    int status = 0;
    waitpid(pid, &status, 0);
    result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);

    if (killed || result.stderr_text.find("TIMEOUT") != std::string::npos) {
        result.status = ExecStatus::timeout;
        if (killed) result.stderr_text += fmt::format("\nTIMEOUT: killed after {}s\n", request.timeout_s + grace_s_);
    } else if (result.exit_code == 0) {
        result.status = ExecStatus::ok;
        result.assets = list_assets(request.asset_dir);
    } else {
        result.status = ExecStatus::runtime_error;
        if (result.exit_code == 127 && result.stderr_text.empty())
            result.stderr_text = fmt::format("cannot execute sandbox runner {}", command_.front());
    }
    return result;
}

ScriptedSandbox::ScriptedSandbox(std::vector<SandboxRule> rules) {
    for (auto& r : rules) add(std::move(r));
}

std::shared_ptr<ScriptedSandbox> ScriptedSandbox::from_json(const nlohmann::json& j) {
    auto sandbox = std::make_shared<ScriptedSandbox>();
    for (const auto& r : j.at("rules")) {
        SandboxRule rule;
        rule.contains = r.value("contains", "");
        rule.exit_code = r.value("exit_code", 0);
        rule.stdout_text = r.value("stdout", "");
        rule.stderr_text = r.value("stderr", "");
        rule.figures = r.value("figures", 0);
        rule.timeout = r.value("timeout", false);
        rule.times = r.value("times", 0);
        sandbox->add(std::move(rule));
    }
    return sandbox;
}

void ScriptedSandbox::add(SandboxRule rule) {
    std::lock_guard lock(mu_);
    rules_.push_back({std::move(rule), 0});
}

std::vector<SandboxRequest> ScriptedSandbox::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

ExecutionResult ScriptedSandbox::run(const SandboxRequest& request) {
    check_request(request);
    SandboxRule rule;
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
        auto it = std::find_if(rules_.begin(), rules_.end(), [&](const Slot& s) {
            return (s.rule.times == 0 || s.used < s.rule.times) && request.code.find(s.rule.contains) != std::string::npos;
        });
        if (it == rules_.end()) {
            ExecutionResult r;
            r.exit_code = 1;
            r.stderr_text = "NameError: no scripted sandbox outcome for this program";
            return r;
        }
        ++it->used;
        rule = it->rule;
    }
    ExecutionResult r;
    r.stdout_text = rule.stdout_text;
    r.stderr_text = rule.stderr_text;
    if (rule.timeout) {
        r.status = ExecStatus::timeout;
        r.exit_code = 124;
        if (r.stderr_text.empty()) r.stderr_text = fmt::format("TIMEOUT after {}s", request.timeout_s);
        return r;
    }
    r.exit_code = rule.exit_code;
    if (rule.exit_code != 0) {
        r.status = ExecStatus::runtime_error;
        return r;
    }
    r.status = ExecStatus::ok;
    for (int i = 1; i <= rule.figures; ++i) render_placeholder_chart(request.asset_dir / fmt::format("figure_{}.png", i), i);
    r.assets = list_assets(request.asset_dir);
    return r;
}

void render_placeholder_chart(const fs::path& path, int variant) {
    cv::Mat img(240, 320, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::line(img, {30, 210}, {300, 210}, cv::Scalar(0, 0, 0), 2);
    cv::line(img, {30, 210}, {30, 20}, cv::Scalar(0, 0, 0), 2);
    for (int b = 0; b < 5; ++b) {
        const int h = 30 + ((b * 37 + variant * 53) % 150);
        cv::rectangle(img, cv::Point(45 + b * 50, 210 - h), cv::Point(75 + b * 50, 209),
                      cv::Scalar(180 - 30 * (variant % 4), 110, 40 + 40 * b), cv::FILLED);
    }
    if (!cv::imwrite(path.string(), img)) throw AnalyzerError(fmt::format("cannot write {}", path.string()));
}

std::vector<std::string> extract_tables(const std::string& stdout_text) {
    std::vector<std::string> tables;
    std::string current;
    bool inside = false;
    for (const auto& line : text::split_lines(stdout_text)) {
        const auto t = text::trim(line);
        if (t == "<<TABLE>>") {
            inside = true;
            current.clear();
        } else if (t == "<</TABLE>>" && inside) {
            inside = false;
            if (!text::trim(current).empty()) tables.push_back(text::trim(current));
        } else if (inside) {
            current += line + "\n";
        }
    }
    return tables;
}

std::string strip_table_sentinels(const std::string& stdout_text) {
    std::string out;
    for (const auto& line : text::split_lines(stdout_text)) {
        const auto t = text::trim(line);
        if (t == "<<TABLE>>" || t == "<</TABLE>>") continue;
        out += line + "\n";
    }
    return out;
}

}  // namespace strata::ska

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace strata {

// Base for every error the engine raises on purpose. Anything else escaping
// a command is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IngestionError : public Error {
public:
    IngestionError(std::string file, const std::string& what)
        : Error(file + ": " + what), file_(std::move(file)) {}
    const std::string& file() const noexcept { return file_; }

private:
    std::string file_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string subject, const std::string& what)
        : Error(subject + ": " + what), subject_(std::move(subject)) {}
    const std::string& subject() const noexcept { return subject_; }

private:
    std::string subject_;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got);
};

class GatewayError : public Error {
public:
    GatewayError(const std::string& what, int attempts, int http_status = 0)
        : Error(what), attempts_(attempts), http_status_(http_status) {}
    int attempts() const noexcept { return attempts_; }
    int http_status() const noexcept { return http_status_; }

private:
    int attempts_;
    int http_status_;
};

// Scripted backend received a call no rule covers.
class ReplayError : public Error {
public:
    ReplayError(const std::string& what, std::string prompt_digest)
        : Error(what), prompt_digest_(std::move(prompt_digest)) {}
    const std::string& prompt_digest() const noexcept { return prompt_digest_; }

private:
    std::string prompt_digest_;
};

class PlanningError : public Error {
public:
    using Error::Error;
};

class AnalyzerError : public Error {
public:
    using Error::Error;
};

class WriterError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

class CompileError : public Error {
public:
    using Error::Error;
};

class JudgeCacheError : public Error {
public:
    JudgeCacheError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Field-level configuration problems, reported all at once.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> diagnostics);
    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

class RunAborted : public Error {
public:
    RunAborted(const std::string& what, std::string trajectory_path)
        : Error(what), trajectory_path_(std::move(trajectory_path)) {}
    const std::string& trajectory_path() const noexcept { return trajectory_path_; }

private:
    std::string trajectory_path_;
};

}  // namespace strata

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "strata/llm/types.hpp"

namespace strata::llm {

// Raised by backends for transport-level failures. The gateway retries
// retryable ones.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, int status, bool retryable)
        : std::runtime_error(what), status_(status), retryable_(retryable) {}
    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual ModelResponse complete(const ModelRequest& request) = 0;
    virtual std::vector<std::vector<double>> embed(const std::string& model, const std::vector<std::string>& texts) = 0;
};

// Disk cache in front of another backend, keyed by (prompt digest, role, model).
// Used for judge calls so re-aggregation never re-queries.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);

    ModelResponse complete(const ModelRequest& request) override;
    std::vector<std::vector<double>> embed(const std::string& model, const std::vector<std::string>& texts) override;

    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }
    std::filesystem::path entry_path(const ModelRequest& request) const;

private:
    std::shared_ptr<Backend> inner_;
    std::filesystem::path dir_;
    std::atomic<std::size_t> hits_ = 0;
    std::atomic<std::size_t> misses_ = 0;
};

}  // namespace strata::llm

#include "strata/store/chunk_store.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace strata::store {

std::vector<std::string> chunk_text(std::string_view text, const ChunkingOptions& options) {
    if (options.chunk_size == 0 || options.overlap >= options.chunk_size)
        throw ValidationError("chunking", "overlap must be smaller than a positive chunk size");
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = std::min(start + options.chunk_size, text.size());
        end = text::utf8_boundary_at_or_before(text, end);
        if (end <= start) end = std::min(start + options.chunk_size, text.size());
        out.emplace_back(text.substr(start, end - start));
        if (end == text.size()) break;
        std::size_t next = text::utf8_boundary_at_or_before(text, end - options.overlap);
        start = next > start ? next : end;
    }
    return out;
}

ChunkStore::ChunkStore(ChunkingOptions options) : options_(options) {}

std::size_t ChunkStore::store_chunks(const std::string& source_url, const std::string& subtask_id,
                                     std::string_view markdown) {
    auto pieces = chunk_text(markdown, options_);
    std::lock_guard lock(mu_);
    if (!stored_.emplace(source_url, subtask_id).second) return 0;
    const std::size_t source_index = stored_.size();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        chunks_.push_back({fmt::format("{}:{}:{}", subtask_id, source_index, i), source_url, subtask_id,
                           std::move(pieces[i]), i});
    }
    return pieces.size();
}

std::vector<WebChunk> ChunkStore::fetch(const std::string& subtask_id) const {
    std::lock_guard lock(mu_);
    std::vector<WebChunk> out;
    for (const auto& c : chunks_)
        if (c.subtask_id == subtask_id) out.push_back(c);
    return out;
}

std::size_t ChunkStore::size() const {
    std::lock_guard lock(mu_);
    return chunks_.size();
}

nlohmann::json ChunkStore::to_json() const {
    std::lock_guard lock(mu_);
    auto arr = nlohmann::json::array();
    for (const auto& c : chunks_) {
        arr.push_back({{"chunk_id", c.chunk_id},
                       {"source_url", c.source_url},
                       {"subtask_id", c.subtask_id},
                       {"position", c.position},
                       {"text", c.text}});
    }
    return arr;
}

}  // namespace strata::store

#pragma once

#include <cstddef>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace strata::store {

struct ChunkingOptions {
    std::size_t chunk_size = 2000;
    std::size_t overlap = 200;
};

struct WebChunk {
    std::string chunk_id;
    std::string source_url;
    std::string subtask_id;
    std::string text;
    std::size_t position = 0;
};

// Splits on byte offsets with `overlap` bytes shared between neighbours,
// never cutting a UTF-8 sequence. ASCII input of length n > size yields
// 1 + ceil((n - size) / (size - overlap)) chunks.
std::vector<std::string> chunk_text(std::string_view text, const ChunkingOptions& options);

// Raw page text kept for the writer. Writes are idempotent per (url, subtask).
class ChunkStore {
public:
    explicit ChunkStore(ChunkingOptions options = {});

    // Returns the number of chunks added (0 when this pair was already stored).
    std::size_t store_chunks(const std::string& source_url, const std::string& subtask_id, std::string_view markdown);
    std::vector<WebChunk> fetch(const std::string& subtask_id) const;
    std::size_t size() const;

    nlohmann::json to_json() const;

private:
    ChunkingOptions options_;
    mutable std::mutex mu_;
    std::vector<WebChunk> chunks_;
    std::set<std::pair<std::string, std::string>> stored_;
};

}  // namespace strata::store

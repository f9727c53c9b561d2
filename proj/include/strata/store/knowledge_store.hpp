#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "strata/store/chunk_store.hpp"
#include "strata/store/table_record.hpp"
#include "strata/store/vector_index.hpp"

namespace strata::store {

// Batch embedder; must return one vector per input text, in order.
using EmbedFn = std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>;

struct StoreOptions {
    bool eager_embedding = false;
    // Where embeddings.bin lives; defaults to the last ingested bundle directory.
    std::optional<std::filesystem::path> embedding_cache;
    ChunkingOptions chunking;
};

// Tables plus their description embeddings, and the web chunk store.
// Reads may run concurrently; ingestion and index preparation take the
// exclusive lock.
class KnowledgeStore {
public:
    explicit KnowledgeStore(StoreOptions options = {});

    // Loads `manifest.jsonl` + `payloads/<id>.json` from `bundle`. A missing
    // manifest in an existing directory is an empty bundle.
    std::size_t ingest_tables(const std::filesystem::path& bundle, const EmbedFn& embed = {});
    void add_table(TableRecord table);

    // Embeds every table lacking a vector, reusing embeddings.bin entries whose
    // text digest still matches, then rewrites the cache.
    void prepare_index(const EmbedFn& embed);
    bool index_ready() const;

    std::size_t table_count() const;
    std::optional<TableRecord> table(const std::string& id) const;
    std::vector<std::string> table_ids() const;
    std::size_t embedding_dim() const;

    // Exact cosine top-k among non-excluded tables.
    std::vector<ScoredTable> dense_retrieve(std::span<const double> query_vector, std::size_t k,
                                            const std::set<std::string>& exclude = {}) const;

    ChunkStore& chunks() noexcept { return chunks_; }
    const ChunkStore& chunks() const noexcept { return chunks_; }

private:
    void embed_pending_locked(const EmbedFn& embed);

    StoreOptions options_;
    mutable std::shared_mutex mu_;
    std::map<std::string, TableRecord> tables_;
    VectorIndex index_;
    std::optional<std::filesystem::path> cache_path_;
    ChunkStore chunks_;
};

}  // namespace strata::store

#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace strata::store {

struct ScoredTable {
    std::string table_id;
    double score = 0.0;
};

// Exact cosine index over unit vectors. Ranking ties go to the smaller id.
class VectorIndex {
public:
    VectorIndex() = default;
    explicit VectorIndex(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(const std::string& id) const { return slot_.contains(id); }

    // Normalizes `vector`; the first insert fixes the dimension.
    void upsert(const std::string& id, std::span<const double> vector);
    std::span<const double> vector_of(const std::string& id) const;

    std::vector<ScoredTable> search(std::span<const double> query, std::size_t k,
                                    const std::set<std::string>& exclude = {}) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t> slot_;
};

std::vector<double> normalized(std::span<const double> v);

// embeddings.bin: u32 dim, u32 count, then per entry
// u32 id length, id bytes, u64 FNV-1a of the embedded text, dim x f64. Little-endian.
struct CachedEmbedding {
    std::string table_id;
    std::uint64_t text_digest = 0;
    std::vector<double> vector;
};

void write_embedding_cache(const std::filesystem::path& path, std::size_t dim,
                           const std::vector<CachedEmbedding>& entries);
std::vector<CachedEmbedding> read_embedding_cache(const std::filesystem::path& path, std::size_t* dim_out = nullptr);

}  // namespace strata::store

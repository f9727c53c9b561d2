#include "strata/store/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "strata/common/errors.hpp"

namespace strata::store {

static_assert(std::endian::native == std::endian::little, "embedding cache assumes a little-endian host");

std::vector<double> normalized(std::span<const double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("vector", "cannot normalize a zero or non-finite vector");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
}

void VectorIndex::upsert(const std::string& id, std::span<const double> vector) {
    if (dim_ == 0) dim_ = vector.size();
    if (vector.size() != dim_) throw DimensionMismatch(dim_, vector.size());
    auto unit = normalized(vector);
    if (auto it = slot_.find(id); it != slot_.end()) {
        std::copy(unit.begin(), unit.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
        return;
    }
    slot_.emplace(id, ids_.size());
    ids_.push_back(id);
    data_.insert(data_.end(), unit.begin(), unit.end());
}

std::span<const double> VectorIndex::vector_of(const std::string& id) const {
    auto it = slot_.find(id);
    if (it == slot_.end()) throw Error("no embedding for table " + id);
    return {data_.data() + it->second * dim_, dim_};
}

std::vector<ScoredTable> VectorIndex::search(std::span<const double> query, std::size_t k,
                                             const std::set<std::string>& exclude) const {
    if (ids_.empty()) return {};
    if (query.size() != dim_) throw DimensionMismatch(dim_, query.size());
    const auto q = normalized(query);

    std::vector<ScoredTable> scored;
    scored.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (exclude.contains(ids_[i])) continue;
        const double* v = data_.data() + i * dim_;
        double dot = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) dot += q[j] * v[j];
        scored.push_back({ids_[i], dot});
    }
    auto better = [](const ScoredTable& a, const ScoredTable& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.table_id < b.table_id;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
    scored.resize(n);
    return scored;
}

namespace {

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IngestionError(path.string(), "truncated embedding cache");
    return value;
}

}  // namespace

void write_embedding_cache(const std::filesystem::path& path, std::size_t dim,
                           const std::vector<CachedEmbedding>& entries) {
    auto tmp = path;
    tmp += ".tmp";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
            if (e.vector.size() != dim) throw DimensionMismatch(dim, e.vector.size());
            put<std::uint32_t>(out, static_cast<std::uint32_t>(e.table_id.size()));
            out.write(e.table_id.data(), static_cast<std::streamsize>(e.table_id.size()));
            put<std::uint64_t>(out, e.text_digest);
            out.write(reinterpret_cast<const char*>(e.vector.data()), static_cast<std::streamsize>(dim * sizeof(double)));
        }
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<CachedEmbedding> read_embedding_cache(const std::filesystem::path& path, std::size_t* dim_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError(path.string(), "cannot open embedding cache");
    const auto dim = get<std::uint32_t>(in, path);
    const auto count = get<std::uint32_t>(in, path);
    if (dim_out) *dim_out = dim;
    std::vector<CachedEmbedding> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CachedEmbedding e;
        const auto len = get<std::uint32_t>(in, path);
        if (len > (1u << 20)) throw IngestionError(path.string(), fmt::format("implausible id length {}", len));
        e.table_id.resize(len);
        if (!in.read(e.table_id.data(), len)) throw IngestionError(path.string(), "truncated embedding cache");
        e.text_digest = get<std::uint64_t>(in, path);
        e.vector.resize(dim);
        if (!in.read(reinterpret_cast<char*>(e.vector.data()), static_cast<std::streamsize>(dim * sizeof(double))))
            throw IngestionError(path.string(), "truncated embedding cache");
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace strata::store

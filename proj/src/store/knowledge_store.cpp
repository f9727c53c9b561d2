#include "strata/store/knowledge_store.hpp"

#include <fstream>
#include <mutex>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "strata/common/digest.hpp"
#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace strata::store {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string required_string(const json& rec, const char* key, const std::string& file, std::size_t line) {
    if (!rec.contains(key) || !rec[key].is_string())
        throw IngestionError(file, fmt::format("line {}: missing string field '{}'", line, key));
    return rec[key].get<std::string>();
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError(path.string(), "cannot open payload file");
    auto parsed = json::parse(in, nullptr, false);
    if (parsed.is_discarded()) throw IngestionError(path.string(), "payload is not valid JSON");
    return parsed;
}

}  // namespace

KnowledgeStore::KnowledgeStore(StoreOptions options)
    : options_(std::move(options)), cache_path_(options_.embedding_cache), chunks_(options_.chunking) {}

std::size_t KnowledgeStore::ingest_tables(const fs::path& bundle, const EmbedFn& embed) {
    if (!fs::is_directory(bundle)) throw IngestionError(bundle.string(), "table bundle directory does not exist");
    const fs::path manifest = bundle / "manifest.jsonl";

    std::vector<TableRecord> loaded;
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        if (!in) throw IngestionError(manifest.string(), "cannot open manifest");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (text::trim(line).empty()) continue;
            auto rec = json::parse(line, nullptr, false);
            if (rec.is_discarded() || !rec.is_object())
                throw IngestionError(manifest.string(), fmt::format("line {}: not a JSON object", lineno));

            TableRecord t;
            t.id = required_string(rec, "id", manifest.string(), lineno);
            t.title = required_string(rec, "title", manifest.string(), lineno);
            t.summary = required_string(rec, "summary", manifest.string(), lineno);
            t.schema_comment = required_string(rec, "schema_comment", manifest.string(), lineno);
            const auto domain = required_string(rec, "domain", manifest.string(), lineno);
            auto parsed_domain = parse_domain(domain);
            if (!parsed_domain)
                throw IngestionError(manifest.string(), fmt::format("line {}: unknown domain '{}'", lineno, domain));
            t.domain = *parsed_domain;
            if (rec.contains("source_uri") && rec["source_uri"].is_string()) t.source_uri = rec["source_uri"].get<std::string>();

            std::string payload_file = rec.value("payload_file", std::string{});
            if (payload_file.empty()) payload_file = "payloads/" + t.id + ".json";
            t.payload = read_json_file(bundle / payload_file);
            validate(t);
            loaded.push_back(std::move(t));
        }
    }

    std::unique_lock lock(mu_);
    for (const auto& t : loaded) {
        if (tables_.contains(t.id)) throw ValidationError(t.id, "duplicate table id");
    }
    std::set<std::string> seen;
    for (const auto& t : loaded) {
        if (!seen.insert(t.id).second) throw ValidationError(t.id, "duplicate table id");
    }
    for (auto& t : loaded) {
        auto id = t.id;
        tables_.emplace(std::move(id), std::move(t));
    }
    if (!cache_path_) cache_path_ = bundle / "embeddings.bin";
    if (options_.eager_embedding && embed) embed_pending_locked(embed);
    spdlog::debug("ingested {} tables from {}", loaded.size(), bundle.string());
    return loaded.size();
}

void KnowledgeStore::add_table(TableRecord table) {
    validate(table);
    std::unique_lock lock(mu_);
    if (tables_.contains(table.id)) throw ValidationError(table.id, "duplicate table id");
    auto id = table.id;
    tables_.emplace(std::move(id), std::move(table));
}

void KnowledgeStore::prepare_index(const EmbedFn& embed) {
    std::unique_lock lock(mu_);
    embed_pending_locked(embed);
}

bool KnowledgeStore::index_ready() const {
    std::shared_lock lock(mu_);
    return index_.size() == tables_.size();
}

void KnowledgeStore::embed_pending_locked(const EmbedFn& embed) {
    if (index_.size() == tables_.size()) return;

    std::unordered_map<std::string, CachedEmbedding> cached;
    if (cache_path_ && fs::exists(*cache_path_)) {
        try {
            for (auto& e : read_embedding_cache(*cache_path_)) {
                auto id = e.table_id;
                cached.emplace(std::move(id), std::move(e));
            }
        } catch (const Error& e) {
            spdlog::warn("ignoring unreadable embedding cache: {}", e.what());
        }
    }

    std::vector<std::string> pending_ids;
    std::vector<std::string> pending_texts;
    for (const auto& [id, t] : tables_) {
        if (index_.contains(id)) continue;
        const auto text = t.description_text();
        auto hit = cached.find(id);
        if (hit != cached.end() && hit->second.text_digest == fnv1a64(text) &&
            (index_.dim() == 0 || hit->second.vector.size() == index_.dim())) {
            index_.upsert(id, hit->second.vector);
            continue;
        }
        pending_ids.push_back(id);
        pending_texts.push_back(text);
    }
    if (!pending_ids.empty()) {
        if (!embed) throw Error(fmt::format("{} tables lack embeddings and no embedder is configured", pending_ids.size()));
        auto vectors = embed(pending_texts);
        if (vectors.size() != pending_ids.size())
            throw Error(fmt::format("embedder returned {} vectors for {} texts", vectors.size(), pending_ids.size()));
        for (std::size_t i = 0; i < vectors.size(); ++i) index_.upsert(pending_ids[i], vectors[i]);
    }

    if (cache_path_ && !pending_ids.empty()) {
        std::vector<CachedEmbedding> entries;
        entries.reserve(tables_.size());
        for (const auto& [id, t] : tables_) {
            auto v = index_.vector_of(id);
            entries.push_back({id, fnv1a64(t.description_text()), {v.begin(), v.end()}});
        }
        try {
            write_embedding_cache(*cache_path_, index_.dim(), entries);
        } catch (const std::exception& e) {
            spdlog::warn("could not persist embedding cache: {}", e.what());
        }
    }
}

std::size_t KnowledgeStore::table_count() const {
    std::shared_lock lock(mu_);
    return tables_.size();
}

std::optional<TableRecord> KnowledgeStore::table(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = tables_.find(id);
    if (it == tables_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> KnowledgeStore::table_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : tables_) out.push_back(id);
    return out;
}

std::size_t KnowledgeStore::embedding_dim() const {
    std::shared_lock lock(mu_);
    return index_.dim();
}

std::vector<ScoredTable> KnowledgeStore::dense_retrieve(std::span<const double> query_vector, std::size_t k,
                                                        const std::set<std::string>& exclude) const {
    if (k == 0) throw ValidationError("dense_retrieve", "k must be positive");
    std::shared_lock lock(mu_);
    if (index_.size() != tables_.size()) throw Error("vector index not prepared; call prepare_index first");
    return index_.search(query_vector, k, exclude);
}

}  // namespace strata::store

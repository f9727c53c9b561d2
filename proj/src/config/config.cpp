#include "strata/config/config.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/text.hpp"

namespace fs = std::filesystem;

namespace strata::config {

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

namespace {

bool bare_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

class ValueParser {
public:
    ValueParser(std::string_view s, const EnvFn& env, std::vector<std::string>& unset) : s_(s), env_(env), unset_(unset) {}

    nlohmann::json parse() {
        auto v = value();
        skip_ws();
        if (i_ < s_.size()) fail("unexpected trailing text");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& why) { throw std::invalid_argument(why); }

    void skip_ws() {
        while (i_ < s_.size()) {
            if (s_[i_] == '#') {
                while (i_ < s_.size() && s_[i_] != '\n') ++i_;
            } else if (std::isspace(static_cast<unsigned char>(s_[i_]))) {
                ++i_;
            } else {
                break;
            }
        }
    }

    nlohmann::json value() {
        skip_ws();
        if (i_ >= s_.size()) fail("missing value");
        const char c = s_[i_];
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') return array();
        return scalar();
    }

    std::string basic_string() {
        ++i_;
        std::string out;
        while (i_ < s_.size() && s_[i_] != '"') {
            char c = s_[i_++];
            if (c == '\\') {
                if (i_ >= s_.size()) break;
                switch (char e = s_[i_++]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case '$': out += '$'; break;
                    default: fail(fmt::format("unknown escape \\{}", e));
                }
            } else if (c == '$' && i_ < s_.size() && s_[i_] == '{') {
                const auto close = s_.find('}', i_);
                if (close == std::string_view::npos) fail("unterminated ${");
                const std::string name(s_.substr(i_ + 1, close - i_ - 1));
                if (name.empty()) fail("empty ${}");
                i_ = close + 1;
                if (auto v = env_(name)) {
                    out += *v;
                } else {
                    unset_.push_back(name);
                }
            } else if (c == '\n') {
                fail("newline in string");
            } else {
                out += c;
            }
        }
        if (i_ >= s_.size()) fail("unterminated string");
        ++i_;
        return out;
    }

    std::string literal_string() {
        const auto close = s_.find('\'', i_ + 1);
        if (close == std::string_view::npos) fail("unterminated string");
        std::string out(s_.substr(i_ + 1, close - i_ - 1));
        i_ = close + 1;
        return out;
    }

    nlohmann::json array() {
        ++i_;
        auto arr = nlohmann::json::array();
        for (;;) {
            skip_ws();
            if (i_ < s_.size() && s_[i_] == ']') {
                ++i_;
                return arr;
            }
            arr.push_back(value());
            skip_ws();
            if (i_ < s_.size() && s_[i_] == ',') {
                ++i_;
            } else if (i_ < s_.size() && s_[i_] == ']') {
                ++i_;
                return arr;
            } else {
                fail("expected , or ] in array");
            }
        }
    }

    nlohmann::json scalar() {
        std::size_t j = i_;
        while (j < s_.size() && !std::isspace(static_cast<unsigned char>(s_[j])) && s_[j] != ',' && s_[j] != ']' && s_[j] != '#') ++j;
        std::string tok(s_.substr(i_, j - i_));
        i_ = j;
        if (tok == "true") return true;
        if (tok == "false") return false;
        std::string digits;
        for (char c : tok)
            if (c != '_') digits += c;
        static const std::regex integer(R"([+-]?\d+)");
        static const std::regex real(R"([+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)");
        if (std::regex_match(digits, integer)) return std::stoll(digits);
        if (std::regex_match(digits, real)) return std::stod(digits);
        fail(fmt::format("cannot read value '{}' (strings need quotes)", tok));
    }

    std::string_view s_;
    std::size_t i_ = 0;
    const EnvFn& env_;
    std::vector<std::string>& unset_;
};

int bracket_depth(std::string_view s) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (c == '\\' && quote == '"') ++i;
            else if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            break;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            --depth;
        }
    }
    return depth;
}

}  // namespace

std::map<std::string, TomlEntry> parse_toml(std::string_view text, const std::string& source, const EnvFn& env,
                                            std::vector<std::string>& diagnostics, std::vector<std::string>* unset) {
    std::map<std::string, TomlEntry> out;
    std::string section;
    const auto lines = text::split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const int line_no = static_cast<int>(n) + 1;
        auto where = [&](const std::string& why) { diagnostics.push_back(fmt::format("{}:{}: {}", source, line_no, why)); };
        const auto line = text::trim(lines[n]);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            const auto close = line.find(']');
            auto rest = close == std::string::npos ? std::string{} : text::trim(line.substr(close + 1));
            if (close == std::string::npos || (!rest.empty() && rest.front() != '#')) {
                where("malformed section header");
                continue;
            }
            section = text::trim(line.substr(1, close - 1));
            bool ok = !section.empty();
            for (char c : section) ok &= bare_key_char(c) || c == '.';
            if (!ok) where(fmt::format("invalid section name '{}'", section));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            where("expected key = value");
            continue;
        }
        const auto key = text::trim(line.substr(0, eq));
        bool ok = !key.empty();
        for (char c : key) ok &= bare_key_char(c);
        if (!ok) {
            where(fmt::format("invalid key '{}'", key));
            continue;
        }
        std::string value_text = line.substr(eq + 1);
        // arrays may span lines
        while (bracket_depth(value_text) > 0 && n + 1 < lines.size()) value_text += "\n" + lines[++n];
        const auto full = section.empty() ? key : section + "." + key;
        std::vector<std::string> missing;
        try {
            auto v = ValueParser(value_text, env, missing).parse();
            if (out.count(full)) {
                where(fmt::format("duplicate key {}", full));
                continue;
            }
            out[full] = {std::move(v), line_no};
            if (unset)
                for (const auto& m : missing) unset->push_back(full + ": " + m);
        } catch (const std::exception& e) {
            where(fmt::format("{}: {}", full, e.what()));
        }
    }
    return out;
}

namespace {

// Typed reads that record every key they touch, so leftovers can be reported
// as unknown.
class Reader {
public:
    Reader(std::map<std::string, TomlEntry> entries, std::vector<std::string>& diags) : entries_(std::move(entries)), diags_(diags) {}

    const nlohmann::json* raw(const std::string& key) {
        used_.insert(key);
        auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second.value;
    }
    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    void str(const std::string& key, std::string& out) {
        if (auto* v = raw(key)) {
            if (v->is_string()) out = v->get<std::string>();
            else bad(key, "expected a string");
        }
    }
    void path(const std::string& key, fs::path& out, const fs::path& base) {
        std::string s;
        if (!has(key)) {
            used_.insert(key);
            return;
        }
        str(key, s);
        if (s.empty()) bad(key, "must not be empty");
        else out = resolve(s, base);
    }
    template <typename Int>
    void integer(const std::string& key, Int& out, long long min) {
        if (auto* v = raw(key)) {
            if (!v->is_number_integer()) return bad(key, "expected an integer");
            const auto x = v->get<long long>();
            if (x < min) return bad(key, fmt::format("must be >= {}", min));
            out = static_cast<Int>(x);
        }
    }
    void real(const std::string& key, double& out, double min, double max) {
        if (auto* v = raw(key)) {
            if (!v->is_number()) return bad(key, "expected a number");
            const auto x = v->get<double>();
            if (x < min || x > max) return bad(key, fmt::format("must be within [{}, {}]", min, max));
            out = x;
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (auto* v = raw(key)) {
            if (v->is_boolean()) out = v->get<bool>();
            else bad(key, "expected true or false");
        }
    }
    void strings(const std::string& key, std::vector<std::string>& out) {
        if (auto* v = raw(key)) {
            if (!v->is_array()) return bad(key, "expected an array of strings");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_string()) return bad(key, "expected an array of strings");
                out.push_back(e.get<std::string>());
            }
        }
    }

    void bad(const std::string& key, const std::string& why) {
        diags_.push_back(fmt::format("{}: {} (line {})", key, why, entries_.count(key) ? entries_.at(key).line : 0));
    }

    std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, _] : entries_)
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        return out;
    }

    void report_unknown() {
        for (const auto& [k, e] : entries_)
            if (!used_.count(k)) diags_.push_back(fmt::format("{}: unknown key (line {})", k, e.line));
    }

    static fs::path resolve(const std::string& s, const fs::path& base) {
        fs::path p(s);
        return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
    }

private:
    std::map<std::string, TomlEntry> entries_;
    std::vector<std::string>& diags_;
    std::set<std::string> used_;
};

}  // namespace

RunConfig parse_config(std::string_view text, const fs::path& source, bool force_offline, const EnvFn& env) {
    std::vector<std::string> diags;
    std::vector<std::string> unset;
    auto entries = parse_toml(text, source.string(), env, diags, &unset);
    const auto base = source.has_parent_path() ? fs::absolute(source).parent_path() : fs::current_path();

    RunConfig c;
    c.source = source;
    for (const auto& u : unset) {
        const auto colon = u.find(": ");
        c.unset_env[u.substr(0, colon)] = u.substr(colon + 2);
    }
    Reader r(std::move(entries), diags);

    r.boolean("run.offline", c.offline);
    c.offline = c.offline || force_offline;
    r.integer("run.seed", c.seed, 0);
    r.path("run.output_dir", c.engine.output_dir, base);
    if (!r.has("run.output_dir")) c.engine.output_dir = (base / "out").lexically_normal();

    r.path("store.tables", c.tables, base);
    if (r.has("store.embedding_cache")) {
        fs::path p;
        r.path("store.embedding_cache", p, base);
        c.embedding_cache = p;
    } else {
        r.raw("store.embedding_cache");
    }
    r.integer("store.chunk_size", c.engine.chunking.chunk_size, 1);
    r.integer("store.chunk_overlap", c.engine.chunking.overlap, 0);
    if (c.engine.chunking.overlap >= c.engine.chunking.chunk_size)
        diags.push_back("store.chunk_overlap: must be smaller than store.chunk_size");

    auto& p = c.engine.planner;
    r.integer("planner.min_subtasks", p.min_subtasks, 1);
    r.integer("planner.max_subtasks", p.max_subtasks, 1);
    r.integer("planner.max_tool_calls_per_subtask", p.max_tool_calls_per_subtask, 1);
    r.integer("planner.min_analyzer_calls_before_write", p.min_analyzer_calls_before_write, 0);
    r.integer("planner.history_token_budget", p.history_token_budget, 1);
    if (p.min_subtasks > p.max_subtasks) diags.push_back("planner.min_subtasks: must not exceed planner.max_subtasks");

    r.integer("uka.max_results", c.engine.uka.max_results, 1);
    r.integer("uka.fetch_concurrency", c.engine.uka.fetch_concurrency, 1);
    r.integer("uka.max_doc_chars", c.engine.uka.max_doc_chars, 1);

    r.integer("ska.top_k", c.engine.ska.top_k, 1);
    r.integer("ska.max_code_retries", c.engine.ska.max_code_retries, 0);
    r.integer("ska.max_validation_retries", c.engine.ska.max_validation_retries, 0);
    r.integer("ska.timeout_s", c.engine.ska.timeout_s, 1);

    r.integer("writer.max_chunk_chars", c.engine.writer.max_chunk_chars, 1);
    r.real("writer.max_refine_drop", c.engine.writer.max_refine_drop, 0.0, 1.0);

    r.strings("sandbox.command", c.sandbox.command);
    r.integer("sandbox.grace_s", c.sandbox.grace_s, 0);

    r.str("web.search_endpoint", c.web.search_endpoint);
    r.str("web.api_key", c.web.api_key);
    r.str("web.api_key_header", c.web.api_key_header);
    r.integer("web.timeout_s", c.web.timeout_s, 1);

    r.path("offline.script", c.offline_inputs.script, base);
    r.path("offline.sandbox", c.offline_inputs.sandbox, base);
    r.path("offline.web", c.offline_inputs.web, base);
    r.path("offline.judge_script", c.offline_inputs.judge_script, base);
    if (c.offline_inputs.judge_script.empty()) c.offline_inputs.judge_script = c.offline_inputs.script;

    c.eval.judge_cache = base / c.eval.judge_cache;
    c.eval.points_dir = base / c.eval.points_dir;
    c.eval.scores_dir = base / c.eval.scores_dir;
    r.path("eval.criteria", c.eval.criteria, base);
    r.path("eval.judge_cache", c.eval.judge_cache, base);
    r.path("eval.points_dir", c.eval.points_dir, base);
    r.path("eval.scores_dir", c.eval.scores_dir, base);

    r.integer("retry.max_retries", c.retry.max_retries, 0);
    long long backoff = c.retry.base_backoff.count();
    r.integer("retry.base_backoff_ms", backoff, 0);
    c.retry.base_backoff = std::chrono::milliseconds(backoff);

    // [models.default] seeds every role; [models.<role>] overrides it.
    auto read_model = [&](const std::string& prefix, ModelConfig& m) {
        r.str(prefix + "endpoint", m.settings.endpoint);
        r.str(prefix + "model", m.settings.model);
        r.str(prefix + "api_key", m.api_key);
        r.integer(prefix + "max_tokens", m.settings.max_tokens, 1);
        r.real(prefix + "temperature", m.settings.temperature, 0.0, 2.0);
        r.real(prefix + "requests_per_minute", m.settings.requests_per_minute, 0.0, 1e6);
        r.real(prefix + "timeout_s", m.timeout_s, 0.001, 3600.0);
    };
    ModelConfig defaults;
    read_model("models.default.", defaults);
    std::set<std::string> role_sections;
    for (const auto& k : r.keys_with_prefix("models.")) {
        const auto rest = k.substr(7);
        const auto dot = rest.find('.');
        if (dot != std::string::npos) role_sections.insert(rest.substr(0, dot));
    }
    for (auto role : llm::kAllRoles) {
        ModelConfig m = defaults;
        const auto role_defaults = llm::default_settings(role);
        if (!r.has("models.default.temperature")) m.settings.temperature = role_defaults.temperature;
        const std::string name(llm::to_string(role));
        read_model("models." + name + ".", m);
        if (m.settings.api_key_env.empty()) {
            const auto key = r.has("models." + name + ".api_key") ? "models." + name + ".api_key" : "models.default.api_key";
            if (c.unset_env.count(key)) m.settings.api_key_env = c.unset_env.at(key);
        }
        c.models[role] = m;
    }
    for (const auto& s : role_sections)
        if (s != "default" && !llm::parse_role(s)) diags.push_back(fmt::format("models.{}: unknown model role", s));

    if (!c.engine.output_dir.empty() && fs::exists(c.engine.output_dir) && !fs::is_directory(c.engine.output_dir))
        diags.push_back(fmt::format("run.output_dir: {} exists and is not a directory", c.engine.output_dir.string()));

    r.report_unknown();
    if (!diags.empty()) throw ConfigError(diags);
    return c;
}

RunConfig load_config(const fs::path& path, bool force_offline, const EnvFn& env) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({fmt::format("{}: cannot read config file", path.string())});
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text, path, force_offline, env);
}

namespace {

void require_file(std::vector<std::string>& diags, const std::string& key, const fs::path& p, bool dir = false) {
    if (p.empty()) diags.push_back(key + ": required");
    else if (dir ? !fs::is_directory(p) : !fs::is_regular_file(p))
        diags.push_back(fmt::format("{}: {} does not exist", key, p.string()));
}

void check_models(const RunConfig& c, const std::vector<llm::ModelRole>& roles, std::vector<std::string>& diags,
                  bool judges = false) {
    if (c.offline) {
        if (judges && c.offline_inputs.judge_script != c.offline_inputs.script)
            require_file(diags, "offline.judge_script", c.offline_inputs.judge_script);
        else
            require_file(diags, "offline.script", c.offline_inputs.script);
        return;
    }
    for (auto role : roles) {
        const auto& m = c.models.at(role);
        const std::string name(llm::to_string(role));
        if (m.settings.endpoint.empty())
            diags.push_back(fmt::format("models.{}.endpoint: required without --offline", name));
        if (m.api_key.empty()) {
            auto it = c.unset_env.find("models." + name + ".api_key");
            if (it == c.unset_env.end()) it = c.unset_env.find("models.default.api_key");
            diags.push_back(it != c.unset_env.end()
                                ? fmt::format("models.{}.api_key: environment variable {} is not set", name, it->second)
                                : fmt::format("models.{}.api_key: required without --offline", name));
        }
    }
}

}  // namespace

void require_models(const RunConfig& config, const std::vector<llm::ModelRole>& roles) {
    std::vector<std::string> diags;
    check_models(config, roles, diags, true);
    if (!diags.empty()) throw ConfigError(diags);
}

void require_for_run(const RunConfig& c) {
    std::vector<std::string> diags;
    require_file(diags, "store.tables", c.tables, true);
    using R = llm::ModelRole;
    check_models(c, {R::planner_chat, R::writer_chat, R::coder, R::vision, R::judge_text, R::embedder}, diags);
    if (c.offline) {
        require_file(diags, "offline.sandbox", c.offline_inputs.sandbox);
        require_file(diags, "offline.web", c.offline_inputs.web);
    } else {
        if (c.sandbox.command.empty()) diags.push_back("sandbox.command: required without --offline");
        if (c.web.search_endpoint.empty()) diags.push_back("web.search_endpoint: required without --offline");
    }
    if (!diags.empty()) throw ConfigError(diags);
}

void require_for_ingest(const RunConfig& c) {
    std::vector<std::string> diags;
    require_file(diags, "store.tables", c.tables, true);
    check_models(c, {llm::ModelRole::embedder}, diags);
    if (!diags.empty()) throw ConfigError(diags);
}

llm::GatewayConfig RunConfig::gateway_config() const {
    llm::GatewayConfig g;
    for (const auto& [role, m] : models) g.roles[role] = m.settings;
    g.retry = retry;
    return g;
}

nlohmann::json RunConfig::to_json() const {
    auto redact = [](const std::string& s) { return s.empty() ? std::string{} : std::string("<redacted>"); };
    nlohmann::json models_j = nlohmann::json::object();
    for (const auto& [role, m] : models)
        models_j[std::string(llm::to_string(role))] = {{"endpoint", m.settings.endpoint},
                                                      {"model", m.settings.model},
                                                      {"api_key", redact(m.api_key)},
                                                      {"max_tokens", m.settings.max_tokens},
                                                      {"temperature", m.settings.temperature},
                                                      {"requests_per_minute", m.settings.requests_per_minute},
                                                      {"timeout_s", m.timeout_s}};
    const auto& p = engine.planner;
    return {
        {"source", source.string()},
        {"run", {{"offline", offline}, {"seed", seed}, {"output_dir", engine.output_dir.string()}}},
        {"store",
         {{"tables", tables.string()},
          {"embedding_cache", embedding_cache ? embedding_cache->string() : ""},
          {"chunk_size", engine.chunking.chunk_size},
          {"chunk_overlap", engine.chunking.overlap}}},
        {"planner",
         {{"min_subtasks", p.min_subtasks},
          {"max_subtasks", p.max_subtasks},
          {"max_tool_calls_per_subtask", p.max_tool_calls_per_subtask},
          {"min_analyzer_calls_before_write", p.min_analyzer_calls_before_write},
          {"history_token_budget", p.history_token_budget}}},
        {"uka",
         {{"max_results", engine.uka.max_results},
          {"fetch_concurrency", engine.uka.fetch_concurrency},
          {"max_doc_chars", engine.uka.max_doc_chars}}},
        {"ska",
         {{"top_k", engine.ska.top_k},
          {"max_code_retries", engine.ska.max_code_retries},
          {"max_validation_retries", engine.ska.max_validation_retries},
          {"timeout_s", engine.ska.timeout_s}}},
        {"writer", {{"max_chunk_chars", engine.writer.max_chunk_chars}, {"max_refine_drop", engine.writer.max_refine_drop}}},
        {"sandbox", {{"command", sandbox.command}, {"grace_s", sandbox.grace_s}}},
        {"web",
         {{"search_endpoint", web.search_endpoint},
          {"api_key", redact(web.api_key)},
          {"api_key_header", web.api_key_header},
          {"timeout_s", web.timeout_s}}},
        {"offline",
         {{"script", offline_inputs.script.string()},
          {"sandbox", offline_inputs.sandbox.string()},
          {"web", offline_inputs.web.string()},
          {"judge_script", offline_inputs.judge_script.string()}}},
        {"eval",
         {{"criteria", eval.criteria.string()},
          {"judge_cache", eval.judge_cache.string()},
          {"points_dir", eval.points_dir.string()},
          {"scores_dir", eval.scores_dir.string()}}},
        {"retry", {{"max_retries", retry.max_retries}, {"base_backoff_ms", retry.base_backoff.count()}}},
        {"models", models_j},
    };
}

}  // namespace strata::config

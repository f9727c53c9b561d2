#include "strata/ska/analyzer.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "strata/common/errors.hpp"
#include "strata/common/image.hpp"
#include "strata/common/text.hpp"

namespace strata::ska {

namespace fs = std::filesystem;
using llm::ModelRole;

namespace {

constexpr std::size_t kFeedbackChars = 3000;
constexpr std::size_t kStdoutChars = 4000;

// Keeps the end of long stderr output, where the exception usually is.
std::string tail(const std::string& s, std::size_t max) {
    if (s.size() <= max) return s;
    auto start = s.size() - max;
    while (start < s.size() && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) ++start;
    return "..." + s.substr(start);
}

std::string safe_name(const std::string& id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

std::string strip_id_decoration(std::string s) {
    s = text::trim(s);
    while (!s.empty() && std::string_view("[]`'\"*.").find(s.front()) != std::string_view::npos) s.erase(0, 1);
    while (!s.empty() && std::string_view("[]`'\"*.").find(s.back()) != std::string_view::npos) s.pop_back();
    return text::trim(s);
}

// The candidate the reply names: an exact (decorated) id, or the only
// candidate id mentioned anywhere in the reply.
std::optional<std::string> pick_candidate(const std::string& reply, const std::vector<store::ScoredTable>& candidates) {
    const auto bare = strip_id_decoration(reply);
    for (const auto& c : candidates)
        if (bare == c.table_id) return c.table_id;
    std::optional<std::string> found;
    for (const auto& c : candidates) {
        if (reply.find(c.table_id) == std::string::npos) continue;
        if (found && found->find(c.table_id) == std::string::npos && c.table_id.find(*found) == std::string::npos)
            return std::nullopt;  // names two different tables
        if (!found || c.table_id.size() > found->size()) found = c.table_id;
    }
    return found;
}

}  // namespace

std::optional<Verdict> parse_verdict(const std::string& reply) {
    for (const auto& line : text::split_lines(reply)) {
        auto t = strip_id_decoration(line);
        for (const auto* key : {"VALID", "REGENERATE"}) {
            if (!text::starts_with_ci(t, key)) continue;
            auto rest = t.substr(std::string_view(key).size());
            while (!rest.empty() && rest.front() == '*') rest.erase(0, 1);
            if (!rest.empty() && rest.front() != ':' && rest.front() != ' ' && rest.front() != '-') continue;
            rest = text::trim(rest.empty() ? rest : rest.substr(1));
            // Anything after the verdict line belongs to it.
            auto pos = reply.find(line);
            auto more = text::trim(reply.substr(pos + line.size()));
            if (!more.empty()) rest += (rest.empty() ? "" : "\n") + more;
            Verdict v;
            v.model_called = true;
            v.valid = std::string_view(key) == "VALID";
            (v.valid ? v.insight : v.reason) = rest;
            return v;
        }
    }
    return std::nullopt;
}

StructuredAnalyzer::StructuredAnalyzer(llm::Gateway& gateway, const store::KnowledgeStore& store, Sandbox& sandbox,
                                       fs::path work_dir, SkaOptions options)
    : gateway_(gateway), store_(store), sandbox_(sandbox), work_dir_(std::move(work_dir)), options_(options) {
    if (options_.top_k == 0) throw AnalyzerError("ska top_k must be at least 1");
    if (options_.max_code_retries < 0 || options_.max_validation_retries < 0)
        throw AnalyzerError("ska retry ceilings must not be negative");
}

store::TableRecord StructuredAnalyzer::retrieve_table(const SkaQuery& query, llm::ExchangeLog& log) {
    if (text::trim(query.text).empty()) throw AnalyzerError("table query is empty");
    const auto qv = gateway_.embed({query.text}, &log, "ska.retrieve").front();
    const auto candidates = store_.dense_retrieve(qv, options_.top_k, used_);
    if (candidates.empty()) throw AnalyzerError(fmt::format("no unused table left for \"{}\"", query.text));

    std::string chosen = candidates.front().table_id;
    if (candidates.size() > 1) {
        std::string listing;
        for (const auto& c : candidates) {
            auto t = store_.table(c.table_id);
            listing += fmt::format("- [{}] {}: {}\n", c.table_id, t->title, text::truncate_utf8(t->summary, 400));
        }
        auto prompt = fmt::format(
            "Select the most relevant table for the analysis query below. Answer with the table id only, "
            "exactly as written between brackets.\n\nQuery: {}\n\nCandidate tables:\n{}",
            query.text, listing);
        std::vector<llm::Message> messages{llm::user_message(prompt)};
        std::optional<std::string> pick;
        for (int round = 0; round < 2 && !pick; ++round) {
            const auto reply = gateway_.chat(ModelRole::judge_text, messages, log, "ska.rerank").text;
            pick = pick_candidate(reply, candidates);
            if (!pick) {
                messages.push_back(llm::assistant_message(reply));
                messages.push_back(llm::user_message(
                    fmt::format("\"{}\" is not one of the candidate ids. Answer with one id from the list.",
                                text::truncate_utf8(text::trim(reply), 200))));
            }
        }
        if (pick) {
            chosen = *pick;
        } else {
            log.warn("ska.rerank", fmt::format("reranker named no candidate twice; using dense top-1 {}", chosen));
        }
    }
    used_.insert(chosen);
    log.info("ska.retrieve", fmt::format("{} -> {}", query.text, chosen));
    return *store_.table(chosen);
}

CodeArtifact StructuredAnalyzer::generate_code(const store::TableRecord& table, const SkaQuery& query, int attempt,
                                               const std::string& prior_error, llm::ExchangeLog& log) {
    if (text::trim(table.schema_comment).empty())
        throw AnalyzerError(fmt::format("table {} has no schema comment", table.id));
    std::string prompt = fmt::format(
        "Write Python code that answers the analysis query using the table described below. The data is already "
        "loaded: the variable `{}` holds the records as a list of dicts with exactly the fields in the schema. "
        "Do not read files or use the network.\n"
        "Save every figure with matplotlib into the directory in the variable ASSET_DIR (for example "
        "plt.savefig(os.path.join(ASSET_DIR, 'figure_1.png'))); do not call plt.show().\n"
        "Print tables as markdown between a line <<TABLE>> and a line <</TABLE>>. Print key numbers to stdout.\n\n"
        "Table: {}\n{}\n\nQuery: {}\n",
        table.variable_name(), table.title, table.schema_comment, query.text);
    if (!prior_error.empty())
        prompt += fmt::format("\nThe previous program failed or was rejected:\n{}\nFix the problem.\n",
                              tail(prior_error, kFeedbackChars));
    prompt += "\nReply with one ```python code block.";

    const auto reply = gateway_.chat(ModelRole::coder, {llm::user_message(prompt)}, log, "ska.generate_code").text;
    CodeArtifact code;
    code.schema_comment = table.schema_comment;
    code.attempt = attempt;
    code.prior_error = prior_error;
    auto fenced = text::extract_fenced(reply, {"python", "py", "python3"});
    if (!fenced) fenced = text::extract_fenced(reply);
    code.source = fenced ? *fenced : reply;
    code.empty = text::trim(code.source).empty();
    return code;
}

fs::path StructuredAnalyzer::data_file_for(const store::TableRecord& table) {
    const auto path = work_dir_ / ".exec" / "data" / (safe_name(table.id) + ".json");
    if (fs::exists(path)) return path;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << nlohmann::json{{"variable", table.variable_name()}, {"records", table.payload}}.dump();
    if (!out) throw AnalyzerError(fmt::format("cannot write data file {}", path.string()));
    return path;
}

StructuredAnalyzer::Execution StructuredAnalyzer::execute_with_retry(const store::TableRecord& table,
                                                                     const SkaQuery& query,
                                                                     const std::string& material_id,
                                                                     const std::string& feedback,
                                                                     llm::ExchangeLog& log) {
    const auto data_file = data_file_for(table);
    Execution exec;
    std::string last_error = feedback;
    const int max_attempts = options_.max_code_retries + 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        exec.code = generate_code(table, query, attempt, last_error, log);
        exec.attempts = attempt;
        if (exec.code.empty) {
            last_error = "empty program";
            log.warn("ska.execute", fmt::format("{} attempt {}: empty program", material_id, attempt));
            continue;
        }
        const auto run_dir = work_dir_ / ".exec" / fmt::format("{}_{}", material_id, ++execution_seq_);
        fs::remove_all(run_dir);
        fs::create_directories(run_dir / "assets");
        exec.result = sandbox_.run({exec.code.source, data_file, run_dir / "assets", options_.timeout_s});
        log.info("ska.execute", fmt::format("{} attempt {}: {}", material_id, attempt, to_string(exec.result.status)));
        if (exec.result.status == ExecStatus::ok) return exec;
        last_error = exec.result.status == ExecStatus::timeout
                         ? fmt::format("TIMEOUT: the program exceeded {}s. {}", options_.timeout_s, exec.result.stderr_text)
                         : exec.result.stderr_text;
        if (text::trim(last_error).empty()) last_error = fmt::format("exit code {}", exec.result.exit_code);
    }
    throw AnalyzerError(fmt::format("analysis code for {} still failing after {} attempts: {}", table.id, max_attempts,
                                    tail(last_error, kFeedbackChars)));
}

Verdict StructuredAnalyzer::analyze_result(const ExecutionResult& result, const SkaQuery& query,
                                           const store::TableRecord& table, llm::ExchangeLog& log) {
    if (result.status != ExecStatus::ok) throw AnalyzerError("only successful executions can be validated");
    const auto printed = text::trim(strip_table_sentinels(result.stdout_text));
    if (result.assets.empty() && printed.empty()) return {false, "", "empty result", false};

    std::vector<fs::path> images;
    for (const auto& a : result.assets)
        if (is_decodable_image(a)) images.push_back(a);

    const auto instruction = fmt::format(
        "An analysis program was run on the table \"{}\" to answer: {}\n\nProgram output:\n{}\n\n"
        "Judge whether the {} answer the query correctly and are readable. If yes, reply 'VALID: ' followed "
        "by the key insight in one or two sentences. Otherwise reply 'REGENERATE: ' followed by what must change.",
        table.title, query.text, printed.empty() ? "(nothing printed)" : text::truncate_utf8(printed, kStdoutChars),
        images.empty() ? "printed results" : "attached figures and printed results");
    const auto reply = images.empty()
                           ? gateway_.chat(ModelRole::vision, {llm::user_message(instruction)}, log, "ska.validate").text
                           : gateway_.analyze_image(ModelRole::vision, images, instruction, log, "ska.validate").text;
    if (auto v = parse_verdict(reply)) {
        if (v->valid && text::trim(v->insight).empty() && images.empty()) return {false, "", "valid verdict without insight", true};
        return *v;
    }
    return {false, "", "unparseable verdict: " + text::truncate_utf8(text::trim(reply), 200), true};
}

SupportingMaterial StructuredAnalyzer::analyze(const SkaQuery& query, std::string material_id, llm::ExchangeLog& log) {
    const auto table = retrieve_table(query, log);
    std::string feedback;
    int code_attempts = 0;
    const int max_rounds = options_.max_validation_retries + 1;
    for (int round = 1; round <= max_rounds; ++round) {
        auto exec = execute_with_retry(table, query, material_id, feedback, log);
        code_attempts += exec.attempts;
        const auto verdict = analyze_result(exec.result, query, table, log);
        if (!verdict.valid) {
            log.info("ska.validate", fmt::format("{} round {}: REGENERATE {}", material_id, round, verdict.reason));
            feedback = "The output was rejected: " + verdict.reason;
            continue;
        }

        SupportingMaterial m;
        m.id = material_id;
        m.kind = MaterialKind::structured;
        m.subtask_id = query.subtask_id;
        m.query = query.text;
        m.table_id = table.id;
        m.table_title = table.title;
        m.insight = text::trim(verdict.insight);
        m.tables = extract_tables(exec.result.stdout_text);
        m.verdict = "valid";
        m.code_attempts = code_attempts;
        m.validation_rounds = round;
        fs::create_directories(work_dir_ / "assets");
        int n = 0;
        for (const auto& a : exec.result.assets) {
            if (!is_decodable_image(a)) continue;
            auto ext = text::to_lower(a.extension().string());
            const auto rel = fmt::format("assets/{}_{}{}", material_id, ++n, ext.empty() ? ".png" : ext);
            fs::copy_file(a, work_dir_ / rel, fs::copy_options::overwrite_existing);
            m.assets.push_back(rel);
        }
        if (m.assets.empty() && m.insight.empty())
            throw AnalyzerError(fmt::format("{} validated without any asset or insight", material_id));
        return m;
    }
    throw AnalyzerError(fmt::format("analysis of {} rejected {} times; last reason: {}", table.id, max_rounds,
                                    feedback.substr(feedback.find(':') + 2)));
}

}  // namespace strata::ska

// strata: run the research engine and the evaluator from the command line.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "strata/common/errors.hpp"
#include "strata/config/config.hpp"
#include "strata/eval/harness.hpp"
#include "strata/llm/http_backend.hpp"
#include "strata/llm/scripted_backend.hpp"
#include "strata/planner/research.hpp"
#include "strata/ska/sandbox.hpp"
#include "strata/uka/web.hpp"
#include "strata/writer/bundle.hpp"

namespace fs = std::filesystem;
using namespace strata;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool dry_run = false;
    bool offline = false;
    bool verbose = false;
};

config::RunConfig load(const Globals& g) {
    fs::path path = g.config_path.empty() ? fs::path("strata.toml") : fs::path(g.config_path);
    config::RunConfig c;
    if (g.config_path.empty() && !fs::exists(path)) {
        // no config anywhere: defaults relative to the working directory
        c = config::parse_config("", fs::current_path() / "strata.toml", g.offline);
    } else {
        c = config::load_config(path, g.offline);
    }
    if (g.seed) c.seed = *g.seed;
    return c;
}

std::shared_ptr<llm::Backend> make_backend(const config::RunConfig& c, bool judges = false) {
    if (c.offline) return llm::ScriptedBackend::from_file(judges ? c.offline_inputs.judge_script : c.offline_inputs.script);
    std::map<llm::ModelRole, llm::EndpointConfig> endpoints;
    for (const auto& [role, m] : c.models)
        if (!m.settings.endpoint.empty()) endpoints[role] = {m.settings.endpoint, m.api_key, m.timeout_s};
    return std::make_shared<llm::HttpBackend>(std::move(endpoints));
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

ResearchQuestion read_question(const std::string& arg, const std::string& id, const std::string& domain) {
    ResearchQuestion q;
    const fs::path p(arg);
    std::error_code ec;
    if (fs::is_regular_file(p, ec)) {
        if (p.extension() == ".json") {
            auto j = writer::read_json_file(p);
            q.text = j.value("text", j.value("question", std::string{}));
            q.id = j.value("id", j.value("question_id", std::string{}));
            if (j.contains("domain") && j["domain"].is_string()) q.domain = j["domain"].get<std::string>();
        } else {
            std::ifstream in(p);
            q.text = std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        }
    } else {
        q.text = arg;
    }
    while (!q.text.empty() && std::isspace(static_cast<unsigned char>(q.text.back()))) q.text.pop_back();
    if (q.text.empty()) throw ValidationError("question", "empty question");
    if (!id.empty()) q.id = id;
    if (q.id.empty()) q.id = planner::question_id_for(q.text);
    if (!domain.empty()) q.domain = domain;
    return q;
}

std::unique_ptr<store::KnowledgeStore> open_store(const config::RunConfig& c, llm::Gateway* gateway) {
    store::StoreOptions opts;
    opts.embedding_cache = c.embedding_cache;
    opts.chunking = c.engine.chunking;
    auto s = std::make_unique<store::KnowledgeStore>(opts);
    if (gateway) {
        s->ingest_tables(c.tables);
        llm::ExchangeLog log;
        s->prepare_index([&](const std::vector<std::string>& texts) { return gateway->embed(texts, &log, "store.index"); });
    } else {
        s->ingest_tables(c.tables);
    }
    return s;
}

int cmd_run(const Globals& g, const std::string& question_arg, const std::string& id, const std::string& domain) {
    auto c = load(g);
    config::require_for_run(c);
    const auto q = read_question(question_arg, id, domain);
    if (g.dry_run) {
        print_json({{"config", c.to_json()}, {"question", to_json(q)}});
        return kOk;
    }
    auto backend = make_backend(c);
    llm::Gateway gateway(c.gateway_config(), backend);
    auto kstore = open_store(c, &gateway);

    std::unique_ptr<uka::OfflineWeb> offline_web;
    std::unique_ptr<uka::HttpSearchClient> search;
    std::unique_ptr<uka::HttpPageFetcher> fetcher;
    std::shared_ptr<ska::Sandbox> sandbox;
    uka::SearchClient* s = nullptr;
    uka::PageFetcher* f = nullptr;
    if (c.offline) {
        offline_web = std::make_unique<uka::OfflineWeb>(uka::OfflineWeb::from_file(c.offline_inputs.web));
        s = offline_web.get();
        f = offline_web.get();
        sandbox = ska::ScriptedSandbox::from_json(writer::read_json_file(c.offline_inputs.sandbox));
    } else {
        std::map<std::string, std::string> headers;
        if (!c.web.api_key.empty()) headers[c.web.api_key_header] = c.web.api_key;
        search = std::make_unique<uka::HttpSearchClient>(c.web.search_endpoint, headers, std::chrono::seconds(c.web.timeout_s));
        fetcher = std::make_unique<uka::HttpPageFetcher>(std::chrono::seconds(c.web.timeout_s));
        s = search.get();
        f = fetcher.get();
        sandbox = std::make_shared<ska::SubprocessSandbox>(c.sandbox.command, c.sandbox.grace_s);
    }

    planner::ResearchEngine engine(gateway, *kstore, *s, *f, *sandbox, c.engine);
    try {
        auto result = engine.run_research(q);
        spdlog::info("{} steps, {} figure(s) from tables{}", result.steps, result.figures_from_tables,
                     result.refine_fallback ? ", refine fell back to concatenation" : "");
        std::cout << result.bundle_dir.string() << "\n";
        return kOk;
    } catch (const RunAborted& e) {
        spdlog::error("run aborted: {}", e.what());
        std::cerr << "trajectory: " << e.trajectory_path() << "\n";
        return kRuntime;
    }
}

int cmd_ingest(const Globals& g, const std::string& tables) {
    auto c = load(g);
    if (!tables.empty()) c.tables = fs::absolute(tables);
    config::require_for_ingest(c);
    if (g.dry_run) {
        print_json({{"config", c.to_json()}});
        return kOk;
    }
    llm::Gateway gateway(c.gateway_config(), make_backend(c));
    auto s = open_store(c, &gateway);
    std::cout << fmt::format("{} table(s) from {}; embedding dim {}\n", s->table_count(), c.tables.string(), s->embedding_dim());
    return kOk;
}

int cmd_inspect(const std::string& bundle_arg) {
    const fs::path bundle(bundle_arg);
    const auto traj_path = fs::is_regular_file(bundle) ? bundle : bundle / writer::kTrajectoryFile;
    const auto dir = traj_path.parent_path();
    if (!fs::exists(traj_path)) throw ValidationError(traj_path.string(), "no trajectory file");
    auto steps = writer::read_json_file(traj_path);
    nlohmann::json meta = nlohmann::json::object();
    if (fs::exists(dir / writer::kMetaFile)) meta = writer::read_json_file(dir / writer::kMetaFile);

    std::cout << fmt::format("question  {}\nstatus    {}\n", meta.value("question", std::string("?")),
                             meta.value("status", std::string("?")));
    if (meta.contains("error")) std::cout << "error     " << meta["error"].get<std::string>() << "\n";
    std::cout << fmt::format("\n{:>3}  {:<5} {:<14} {:<10} {:<16} {}\n", "#", "sub", "tool", "status", "materials", "query");
    for (const auto& st : steps) {
        std::string tool = "-", query;
        if (st.contains("tool_call") && st["tool_call"].is_object()) {
            tool = st["tool_call"].value("kind", std::string("?"));
            query = st["tool_call"].value("query", std::string{});
        }
        std::string mats;
        if (st.contains("material_ids"))
            for (const auto& m : st["material_ids"]) mats += (mats.empty() ? "" : ",") + m.get<std::string>();
        if (query.size() > 60) query = query.substr(0, 57) + "...";
        std::cout << fmt::format("{:>3}  {:<5} {:<14} {:<10} {:<16} {}\n", st.value("index", 0),
                                 st.value("subtask_id", std::string("-")), tool, st.value("status", std::string("?")),
                                 mats.empty() ? "-" : mats, query);
    }
    if (meta.value("status", std::string{}) == "aborted") return kOk;
    const auto problems = writer::validate_bundle(dir);
    for (const auto& p : problems) std::cout << "invalid: " << p << "\n";
    return problems.empty() ? kOk : kRuntime;
}

struct EvalContext {
    config::RunConfig config;
    std::shared_ptr<llm::CachingBackend> backend;
    std::unique_ptr<llm::Gateway> gateway;
    llm::ExchangeLog log;
    std::unique_ptr<eval::Judge> judge;

    void finish(const std::string& mode) {
        writer::write_json_atomic(config.eval.scores_dir / fmt::format("judge_log_{}.json", mode),
                                  llm::mask_timing({{"exchanges", log.exchanges_json()}, {"events", log.events_json()}}));
        spdlog::info("judge cache: {} hit(s), {} miss(es)", backend->hits(), backend->misses());
    }
};

std::unique_ptr<EvalContext> eval_context(const Globals& g, const std::vector<llm::ModelRole>& roles) {
    auto ctx = std::make_unique<EvalContext>();
    ctx->config = load(g);
    config::require_models(ctx->config, roles);
    ctx->backend = std::make_shared<llm::CachingBackend>(make_backend(ctx->config, true), ctx->config.eval.judge_cache);
    ctx->gateway = std::make_unique<llm::Gateway>(ctx->config.gateway_config(), ctx->backend);
    ctx->judge = std::make_unique<eval::Judge>(*ctx->gateway, ctx->log);
    return ctx;
}

std::vector<eval::BundleInput> read_bundles(const std::vector<std::string>& dirs) {
    std::vector<eval::BundleInput> out;
    for (const auto& d : dirs) out.push_back(eval::read_bundle(d));
    return out;
}

int cmd_eval_race(const Globals& g, const std::vector<std::string>& gen, const std::vector<std::string>& ref) {
    if (gen.size() != ref.size())
        throw ValidationError("eval race", fmt::format("{} --gen bundle(s) but {} --ref report(s)", gen.size(), ref.size()));
    auto ctx = eval_context(g, {llm::ModelRole::judge_text});
    auto criteria = ctx->config.eval.criteria.empty() ? eval::default_criteria() : eval::load_criteria(ctx->config.eval.criteria);
    std::vector<eval::RaceItem> items;
    for (std::size_t i = 0; i < gen.size(); ++i) items.push_back({eval::read_bundle(gen[i]), eval::read_reference(ref[i])});
    if (g.dry_run) {
        print_json({{"config", ctx->config.to_json()}, {"questions", items.size()}});
        return kOk;
    }
    auto agg = eval::evaluate_race(*ctx->judge, items, criteria, ctx->config.eval.scores_dir);
    ctx->finish("race");
    std::cout << eval::render_summary("race", agg);
    return kOk;
}

int cmd_eval_knowledge(const Globals& g, const std::vector<std::string>& bundles, const std::string& points_dir) {
    auto ctx = eval_context(g, {llm::ModelRole::judge_text});
    if (!points_dir.empty()) ctx->config.eval.points_dir = fs::absolute(points_dir);
    auto inputs = read_bundles(bundles);
    std::map<std::string, std::string> tables;
    if (!ctx->config.tables.empty() && fs::is_directory(ctx->config.tables)) {
        auto s = open_store(ctx->config, nullptr);
        for (const auto& id : s->table_ids()) tables[id] = s->table(id)->title;
    }
    if (g.dry_run) {
        print_json({{"config", ctx->config.to_json()}, {"questions", inputs.size()}});
        return kOk;
    }
    auto agg = eval::evaluate_knowledge(*ctx->judge, inputs, ctx->config.eval.points_dir, tables, ctx->config.eval.scores_dir);
    ctx->finish("knowledge");
    std::cout << eval::render_summary("knowledge", agg);
    return kOk;
}

int cmd_eval_vision(const Globals& g, const std::vector<std::string>& a, const std::vector<std::string>& b,
                    const std::string& name_a, const std::string& name_b) {
    if (a.size() != b.size())
        throw ValidationError("eval vision", fmt::format("{} bundle(s) for {} but {} for {}", a.size(), name_a, b.size(), name_b));
    auto ctx = eval_context(g, {llm::ModelRole::judge_vision});
    auto ia = read_bundles(a);
    auto ib = read_bundles(b);
    if (g.dry_run) {
        print_json({{"config", ctx->config.to_json()}, {"pairs", ia.size()}});
        return kOk;
    }
    auto agg = eval::evaluate_vision(*ctx->judge, ia, ib, name_a, name_b, ctx->config.seed, ctx->config.eval.scores_dir);
    ctx->finish("vision");
    std::cout << eval::render_summary("vision", agg);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("strata");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%^%l%$: %v");

    CLI::App app{"Hybrid-knowledge research engine and report evaluator"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Config file (default: ./strata.toml)");
    app.add_option("--seed", g.seed, "Seed for randomized evaluation order");
    app.add_flag("--dry-run", g.dry_run, "Print the resolved configuration and stop before any model call");
    app.add_flag("--offline", g.offline, "Use the scripted backend, sandbox and web recording from [offline]");
    app.add_flag("-v,--verbose", g.verbose, "Debug logging");

    std::string question, qid, domain;
    auto* run = app.add_subcommand("run", "Answer a research question and write a report bundle");
    run->add_option("question", question, "Question text, or a .json/.txt file holding it")->required();
    run->add_option("--id", qid, "Question id (default: derived from the text)");
    run->add_option("--domain", domain, "Question domain");

    std::string tables;
    auto* ingest = app.add_subcommand("ingest", "Load a table bundle and build its embedding index");
    ingest->add_option("tables", tables, "Table bundle directory (default: store.tables)");

    std::string bundle;
    auto* inspect = app.add_subcommand("inspect-trajectory", "Summarize a bundle's trajectory and check its invariants");
    inspect->add_option("bundle", bundle, "Bundle directory or trajectory.json")->required();

    auto* ev = app.add_subcommand("eval", "Score report bundles");
    ev->require_subcommand(1);
    std::vector<std::string> gen, ref, bundles, side_a, side_b;
    std::string points_dir, name_a = "A", name_b = "B";
    auto* race = ev->add_subcommand("race", "Criterion-weighted comparison against reference reports");
    race->add_option("--gen", gen, "Generated bundles")->required();
    race->add_option("--ref", ref, "Reference reports (bundle or .md), aligned with --gen")->required();
    auto* knowledge = ev->add_subcommand("knowledge", "Main alignment, key coverage and supportiveness");
    knowledge->add_option("bundles", bundles, "Bundles to score")->required();
    knowledge->add_option("--points-dir", points_dir, "Directory of <question_id>.json point files");
    auto* vision = ev->add_subcommand("vision", "Pairwise preference over compiled PDFs");
    vision->add_option("--a", side_a, "Bundles of agent A")->required();
    vision->add_option("--b", side_b, "Bundles of agent B, aligned with --a")->required();
    vision->add_option("--name-a", name_a, "Label for agent A");
    vision->add_option("--name-b", name_b, "Label for agent B");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*run) return cmd_run(g, question, qid, domain);
        if (*ingest) return cmd_ingest(g, tables);
        if (*inspect) return cmd_inspect(bundle);
        if (*race) return cmd_eval_race(g, gen, ref);
        if (*knowledge) return cmd_eval_knowledge(g, bundles, points_dir);
        if (*vision) return cmd_eval_vision(g, side_a, side_b, name_a, name_b);
    } catch (const ConfigError& e) {
        std::cerr << "config error:\n";
        for (const auto& d : e.diagnostics()) std::cerr << "  " << d << "\n";
        return kUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const JudgeCacheError& e) {
        std::cerr << "judge cache error: " << e.what() << "\ncache entry: " << e.path() << "\n";
        return kRuntime;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}

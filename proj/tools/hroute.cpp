// hroute: pipeline commands over the header-only library.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hroute.hpp"

using namespace hroute;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string backend;
    std::string out;
};

/// Thrown for problems with flags or configuration; exits 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

PipelineConfig resolve_config(const Globals& g) {
    PipelineConfig cfg;
    try {
        if (!g.config_path.empty()) cfg = load_config(g.config_path);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (g.seed) cfg.seed = g.seed;
    if (!g.backend.empty()) cfg.backend.mode = g.backend;
    if (cfg.backend.mode == "mock" && !cfg.seed) throw UsageError("mock backend needs a seed: pass --seed or set \"seed\" in the config");
    return cfg;
}

std::shared_ptr<Gateway> make_gateway(const PipelineConfig& cfg) {
    if (cfg.backend.mode == "mock") return make_mock_gateway(*cfg.seed, cfg.backend.gateway);
    const std::string key = api_key_from_env(cfg.backend.api_key_env);
    if (cfg.backend.chat_url.empty() || cfg.backend.embed_url.empty())
        throw UsageError("live backend needs backend.chat_url and backend.embed_url");
    auto chat = std::make_shared<HttpChatBackend>(HttpEndpoint{cfg.backend.chat_url, cfg.backend.chat_path, key});
    auto embed = std::make_shared<HttpEmbeddingBackend>(HttpEndpoint{cfg.backend.embed_url, cfg.backend.embed_path, key},
                                                        cfg.backend.embed_model);
    return std::make_shared<Gateway>(chat, embed, cfg.backend.gateway);
}

std::uint64_t seed_of(const PipelineConfig& cfg) { return cfg.seed.value_or(0); }

std::string require_out(const Globals& g, const char* what) {
    if (g.out.empty()) throw UsageError(std::string("--out is required for ") + what);
    return g.out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"History-aware candidate routing: graph, mutation, synthesis, supervision and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Global RNG seed (mandatory with the mock backend)");
    app.add_option("--backend", g.backend, "Backend: mock or live")->check(CLI::IsMember({"mock", "live"}));
    app.add_option("--out", g.out, "Output file");

    // build-graph
    auto* build = app.add_subcommand("build-graph", "Embed a candidate bank and build its similarity graph");
    std::string bank_path;
    std::string kind_name;
    std::optional<double> tau;
    build->add_option("--bank", bank_path, "Candidate bank (JSONL or JSON array)")->required()->check(CLI::ExistingFile);
    build->add_option("--kind", kind_name, "tool or agent (inferred when omitted)")->check(CLI::IsMember({"tool", "agent"}));
    build->add_option("--tau", tau, "Similarity threshold");

    // mutate
    auto* mutate = app.add_subcommand("mutate", "Grow a graph with LLM-generated variants");
    std::string graph_path;
    std::optional<int> rounds;
    std::string log_path;
    mutate->add_option("--graph", graph_path, "Input graph snapshot")->required()->check(CLI::ExistingFile);
    mutate->add_option("--rounds", rounds, "Mutation rounds")->check(CLI::NonNegativeNumber);
    mutate->add_option("--log", log_path, "Per-round mutation log (JSONL)");

    // sample
    auto* sample = app.add_subcommand("sample", "Sample candidate subsets from a graph");
    std::size_t sample_count = 10;
    sample->add_option("--graph", graph_path, "Graph snapshot")->required()->check(CLI::ExistingFile);
    sample->add_option("--count", sample_count, "Number of subsets");

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "Sample subsets, propose tasks and simulate trajectories");
    std::optional<std::size_t> synth_count;
    synth->add_option("--graph", graph_path, "Graph snapshot")->required()->check(CLI::ExistingFile);
    synth->add_option("--count", synth_count, "Number of trajectories");

    // extract
    auto* extract = app.add_subcommand("extract", "Turn trajectories into rendered routing samples");
    std::string traj_path;
    bool ablation_flag = false;
    std::optional<std::size_t> pool_size;
    extract->add_option("--trajectories", traj_path, "Trajectories (JSONL)")->required()->check(CLI::ExistingFile);
    extract->add_option("--graph", graph_path, "Graph snapshot whose bank resolves candidates")->required()->check(CLI::ExistingFile);
    extract->add_flag("--ablation", ablation_flag, "Also write the history-stripped twin dataset");
    extract->add_option("--pool-size", pool_size, "Pool size per trajectory (subset plus distractors)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Route a dataset and report avg@k");
    std::string dataset_path;
    std::vector<std::string> routers;
    std::vector<std::string> settings;
    std::vector<std::string> group_banks;
    std::string mutation_graph;
    std::string external_bank;
    std::optional<int> k;
    std::string csv_path;
    bool by_group = false;
    eval->add_option("--dataset", dataset_path, "Rendered samples (JSONL)")->required()->check(CLI::ExistingFile);
    eval->add_option("--router", routers, "Router variant (repeatable)")
        ->check(CLI::IsMember({"embedding_q", "embedding_qh", "llm", "oracle", "random"}));
    eval->add_option("--setting", settings, "Pool setting (repeatable)")
        ->check(CLI::IsMember({"Clean", "Multi", "+Mutation", "+External", "clean", "multi", "mutation", "external"}));
    eval->add_option("--group-bank", group_banks, "Bank merged from Multi on (repeatable)")->check(CLI::ExistingFile);
    eval->add_option("--mutation-graph", mutation_graph, "Evolved graph for +Mutation")->check(CLI::ExistingFile);
    eval->add_option("--external-bank", external_bank, "Outside bank for +External")->check(CLI::ExistingFile);
    eval->add_option("--k", k, "Independent runs")->check(CLI::PositiveNumber);
    eval->add_option("--csv", csv_path, "Also write the table as CSV");
    eval->add_flag("--by-group", by_group, "One column per (setting, group)");

    // lra-run
    auto* lra = app.add_subcommand("lra-run", "Run light routing agent episodes");
    std::string tasks_path;
    std::string task_text;
    std::string lra_router = "embedding_qh";
    std::string executors_path;
    std::optional<std::size_t> budget;
    lra->add_option("--graph", graph_path, "Graph snapshot whose bank is the pool")->required()->check(CLI::ExistingFile);
    auto* tasks_opt = lra->add_option("--tasks", tasks_path, "Tasks (JSONL with a \"task\" field)")->check(CLI::ExistingFile);
    lra->add_option("--task", task_text, "A single task")->excludes(tasks_opt);
    lra->add_option("--router", lra_router, "Router variant")->check(CLI::IsMember({"embedding_q", "embedding_qh", "llm", "random"}));
    lra->add_option("--executors", executors_path, "Executor descriptor (JSON)")->check(CLI::ExistingFile);
    lra->add_option("--budget", budget, "Step budget per episode")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const PipelineConfig cfg = resolve_config(g);
        auto gateway = make_gateway(cfg);
        const std::uint64_t seed = seed_of(cfg);

        if (*build) {
            std::optional<CandidateKind> kind;
            if (!kind_name.empty()) kind = parse_candidate_kind(kind_name);
            const CandidateBank bank = load_bank(bank_path, kind, ValidationMode::Lenient);
            GraphConfig gc = cfg.graph;
            if (tau) gc.tau = *tau;
            const CandidateGraph graph = build_graph(bank, gc, *gateway);
            const std::string out = require_out(g, "build-graph");
            save_graph_with_bank(graph, out);
            std::cout << "nodes " << graph.size() << ", similarity edges " << graph.count_edges(EdgeKind::Similarity) << "\n";
        } else if (*mutate) {
            CandidateGraph graph = load_graph_with_bank(graph_path);
            EvolveConfig ec = cfg.mutation;
            ec.seed = derive_seed(seed, "mutate");
            ec.prompt.model_id = cfg.backend.chat_model;
            EvolveResult result = evolve(std::move(graph), rounds.value_or(cfg.mutation_rounds), ec, *gateway);
            save_graph_with_bank(result.graph, require_out(g, "mutate"));
            if (!log_path.empty()) write_mutation_log(result.records, log_path);
            std::cout << "accepted " << result.accepted() << " of " << result.records.size() << " rounds, nodes "
                      << result.graph.size() << "\n";
            if (result.aborted) {
                std::cerr << "error: aborted: " << result.aborted->what() << "\n";
                return 1;
            }
        } else if (*sample) {
            const CandidateGraph graph = load_graph_with_bank(graph_path);
            std::vector<Json> lines;
            for (std::size_t i = 0; i < sample_count; ++i) {
                SamplerConfig sc = cfg.sampler;
                sc.rng_seed = derive_seed(derive_seed(seed, "sample"), i);
                lines.push_back(to_json(sample_subset(graph, sc)));
            }
            write_records(require_out(g, "sample"), lines);
            std::cout << "subsets " << lines.size() << "\n";
        } else if (*synth) {
            const CandidateGraph graph = load_graph_with_bank(graph_path);
            SimulationConfig sim = cfg.synthesis.simulation;
            sim.llm.model_id = cfg.backend.chat_model;
            const auto report = synthesize(graph, synth_count.value_or(cfg.synthesis.count), cfg.sampler, sim,
                                           cfg.synthesis.attempts_per_trajectory, derive_seed(seed, "synthesize"), *gateway);
            save_trajectories(report.trajectories, require_out(g, "synthesize"));
            std::size_t calls = 0;
            for (const auto& t : report.trajectories) calls += t.call_count();
            std::cout << "trajectories " << report.trajectories.size() << ", calls " << calls << ", empty slots "
                      << report.failed_slots << "\n";
            for (const auto& [reason, n] : report.discards) std::cout << "discarded (" << reason << ") " << n << "\n";
        } else if (*extract) {
            const CandidateGraph graph = load_graph_with_bank(graph_path);
            auto catalog = std::make_shared<const CandidateCatalog>(graph.to_bank());
            const auto trajs = load_trajectories(traj_path);
            DatasetConfig dc;
            dc.kind = graph.to_bank().kind();
            dc.ablation = ablation_flag || cfg.ablation;
            const auto pools = pools_for(trajs, catalog, pool_size.value_or(cfg.synthesis.pool_size), derive_seed(seed, "pools"));
            const std::string out = require_out(g, "extract");
            const auto stats = build_dataset(trajs, pools, dc, out);
            std::cout << "trajectories " << stats.trajectories << ", samples " << stats.instances;
            if (dc.ablation) std::cout << ", ablation samples " << stats.ablation_instances << " -> " << ablation_path_for(out);
            std::cout << "\n";
        } else if (*eval) {
            const auto dataset = load_dataset(dataset_path);
            if (routers.empty()) routers = cfg.eval.routers;
            if (settings.empty()) settings = cfg.eval.settings;
            PoolSetting base;
            for (const auto& p : group_banks) base.group_banks.push_back(std::make_shared<const CandidateBank>(load_bank(p, std::nullopt, ValidationMode::Lenient)));
            if (!mutation_graph.empty()) base.mutation_graph = std::make_shared<const CandidateGraph>(load_graph_with_bank(mutation_graph));
            if (!external_bank.empty()) base.external_bank = std::make_shared<const CandidateBank>(load_bank(external_bank, std::nullopt, ValidationMode::Lenient));
            EvalConfig ec{k.value_or(cfg.eval.k), derive_seed(seed, "evaluate"), cfg.eval.concurrency};
            std::vector<MethodResult> results;
            for (const auto& r : routers) {
                const auto variant = parse_router_variant(r);
                if (!variant) throw UsageError("unknown router variant " + r);
                RouterConfig rc;
                rc.variant = *variant;
                rc.timeout = cfg.eval.timeout;
                rc.temperature = cfg.eval.temperature;
                rc.model_id = cfg.eval.router_model;
                for (const auto& s : settings) {
                    PoolSetting ps = base;
                    ps.kind = *parse_pool_setting(s);
                    try {
                        ps.validate();
                    } catch (const Error& e) {
                        throw UsageError(e.what());
                    }
                    results.push_back({r, ps.kind, evaluate(rc, dataset, ps, ec, *gateway)});
                }
            }
            std::cout << report(results, by_group);
            if (!g.out.empty()) write_records(g.out, result_records(results));
            if (!csv_path.empty()) write_text_file(csv_path, render_table_csv(make_table(results, by_group)));
        } else if (*lra) {
            const CandidateGraph graph = load_graph_with_bank(graph_path);
            auto catalog = std::make_shared<const CandidateCatalog>(graph.to_bank());
            CandidatePool pool = CandidatePool::make(catalog, catalog->names());
            for (const auto& n : graph.nodes())
                if (n.spec.provenance().is_mutant()) pool.non_callable.insert(n.spec.name());
            std::vector<std::string> tasks;
            if (!task_text.empty()) tasks.push_back(task_text);
            if (!tasks_path.empty())
                for (const auto& rec : read_records(tasks_path)) {
                    if (!rec.value.contains("task") || !rec.value["task"].is_string())
                        throw Error(Errc::DatasetFormat, tasks_path + ":" + std::to_string(rec.line) + ": missing task");
                    tasks.push_back(rec.value["task"].get<std::string>());
                }
            if (tasks.empty()) throw UsageError("lra-run needs --task or --tasks");
            ExecutorBinding executors;
            executors.fallback = std::make_shared<MockTableExecutor>();
            if (!executors_path.empty()) {
                Json doc = Json::parse(read_text_file(executors_path), nullptr, false);
                if (doc.is_discarded()) throw Error(Errc::ParseError, executors_path + ": not valid JSON");
                executors = binding_from_json(doc);
                if (!executors.covers(pool)) throw UsageError("executor descriptor does not cover the pool; add a \"default\"");
            }
            RouterConfig rc;
            rc.variant = *parse_router_variant(lra_router);
            rc.kind = graph.to_bank().kind();
            rc.model_id = cfg.eval.router_model;
            std::vector<Json> logs;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                EpisodeConfig ec;
                ec.budget = budget.value_or(cfg.lra_budget);
                ec.reasoner_model = cfg.backend.chat_model;
                ec.seed = derive_seed(derive_seed(seed, "lra"), i);
                const auto log = run_episode(tasks[i], pool, rc, executors, gateway_reasoner(*gateway), *gateway, ec);
                std::cout << "episode " << i << ": " << to_string(log.outcome) << ", steps " << log.steps.size()
                          << ", max prompt chars " << log.context_audit.max_prompt_chars << "\n";
                logs.push_back(to_json(log));
            }
            write_records(require_out(g, "lra-run"), logs);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const Error& e) {
        if (e.is(Errc::BadConfig) || e.is(Errc::MissingParameter)) {
            std::cerr << "usage error: " << e.what() << "\n";
            return 2;
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

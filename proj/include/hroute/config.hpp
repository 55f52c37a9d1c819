#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/graph.hpp"
#include "hroute/json_util.hpp"
#include "hroute/mutation.hpp"
#include "hroute/sampler.hpp"
#include "hroute/trajectory.hpp"

namespace hroute {

struct BackendSettings {
    std::string mode = "mock";  // mock | live
    std::string chat_url;
    std::string chat_path = "/v1/chat/completions";
    std::string embed_url;
    std::string embed_path = "/v1/embeddings";
    std::string api_key_env = "HROUTE_API_KEY";
    std::string chat_model = "mock";
    std::string embed_model = "text-embedding";
    GatewayConfig gateway;
};

struct SynthesisSettings {
    std::size_t count = 100;
    std::size_t pool_size = 10;
    SimulationConfig simulation;
    /// Attempts per trajectory slot before it is skipped.
    int attempts_per_trajectory = 3;
};

struct EvalSettings {
    int k = 5;
    std::vector<std::string> routers{"oracle", "embedding_q", "embedding_qh"};
    std::vector<std::string> settings{"Clean"};
    std::size_t concurrency = 8;
    std::chrono::milliseconds timeout{60000};
    double temperature = 1.0;
    std::string router_model = "mock";
};

struct PipelineConfig {
    std::optional<std::uint64_t> seed;
    BackendSettings backend;
    GraphConfig graph;
    int mutation_rounds = 40;
    EvolveConfig mutation;
    SamplerConfig sampler;
    SynthesisSettings synthesis;
    bool ablation = false;
    CandidateKind kind = CandidateKind::Tool;
    EvalSettings eval;
    std::size_t lra_budget = 8;

    std::uint64_t require_seed() const {
        if (!seed) throw Error(Errc::BadConfig, "a seed is required (set \"seed\" in the config or pass --seed)");
        return *seed;
    }
};

namespace detail {

template <typename T>
void read_into(const Json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

inline void read_ms(const Json& obj, const char* key, std::chrono::milliseconds& out) {
    if (auto it = obj.find(key); it != obj.end()) out = std::chrono::milliseconds(it->get<long long>());
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are ignored.
inline PipelineConfig config_from_json(const Json& doc) {
    using detail::read_into;
    PipelineConfig c;
    if (!doc.is_object()) throw Error(Errc::BadConfig, "config must be a JSON object");
    try {
        if (doc.contains("seed") && !doc["seed"].is_null()) c.seed = doc["seed"].get<std::uint64_t>();
        const Json b = doc.value("backend", Json::object());
        read_into(b, "mode", c.backend.mode);
        read_into(b, "chat_url", c.backend.chat_url);
        read_into(b, "chat_path", c.backend.chat_path);
        read_into(b, "embed_url", c.backend.embed_url);
        read_into(b, "embed_path", c.backend.embed_path);
        read_into(b, "api_key_env", c.backend.api_key_env);
        read_into(b, "chat_model", c.backend.chat_model);
        read_into(b, "embed_model", c.backend.embed_model);
        read_into(b, "max_retries", c.backend.gateway.max_retries);
        detail::read_ms(b, "initial_backoff_ms", c.backend.gateway.initial_backoff);
        read_into(b, "max_chat_calls", c.backend.gateway.max_chat_calls);
        read_into(b, "max_in_flight", c.backend.gateway.max_in_flight);
        read_into(b, "embed_batch_size", c.backend.gateway.embed_batch_size);

        const Json g = doc.value("graph", Json::object());
        read_into(g, "tau", c.graph.tau);

        const Json m = doc.value("mutation", Json::object());
        read_into(m, "rounds", c.mutation_rounds);
        read_into(m, "max_retries", c.mutation.max_retries);
        read_into(m, "agent_share", c.mutation.agent_share);
        read_into(m, "tool_operator_weights", c.mutation.tool_operator_weights);
        read_into(m, "agent_operator_weights", c.mutation.agent_operator_weights);
        read_into(m, "temperature", c.mutation.prompt.temperature);
        read_into(m, "max_tokens", c.mutation.prompt.max_tokens);

        const Json s = doc.value("sampler", Json::object());
        read_into(s, "num_seeds", c.sampler.num_seeds);
        if (s.contains("target_size") && !s["target_size"].is_null()) c.sampler.target_size = s["target_size"].get<std::size_t>();
        read_into(s, "min_size", c.sampler.min_size);
        read_into(s, "max_size", c.sampler.max_size);
        read_into(s, "restart_prob", c.sampler.restart_prob);

        const Json y = doc.value("synthesis", Json::object());
        read_into(y, "count", c.synthesis.count);
        read_into(y, "pool_size", c.synthesis.pool_size);
        read_into(y, "max_turns", c.synthesis.simulation.max_turns);
        read_into(y, "error_injection", c.synthesis.simulation.error_injection);
        read_into(y, "max_calls_per_action", c.synthesis.simulation.max_calls_per_action);
        read_into(y, "temperature", c.synthesis.simulation.llm.temperature);
        read_into(y, "max_retries", c.synthesis.simulation.llm.max_retries);
        read_into(y, "attempts_per_trajectory", c.synthesis.attempts_per_trajectory);

        const Json d = doc.value("dataset", Json::object());
        read_into(d, "ablation", c.ablation);
        if (d.contains("kind")) {
            auto k = parse_candidate_kind(d["kind"].get<std::string>());
            if (!k) throw Error(Errc::BadConfig, "dataset.kind must be tool or agent");
            c.kind = *k;
        }

        const Json e = doc.value("eval", Json::object());
        read_into(e, "k", c.eval.k);
        read_into(e, "routers", c.eval.routers);
        read_into(e, "settings", c.eval.settings);
        read_into(e, "concurrency", c.eval.concurrency);
        detail::read_ms(e, "timeout_ms", c.eval.timeout);
        read_into(e, "temperature", c.eval.temperature);
        read_into(e, "router_model", c.eval.router_model);

        read_into(doc.value("lra", Json::object()), "budget", c.lra_budget);
    } catch (const Json::exception& ex) {
        throw Error(Errc::BadConfig, ex.what());
    }
    if (c.backend.mode != "mock" && c.backend.mode != "live") throw Error(Errc::BadConfig, "backend.mode must be mock or live");
    c.graph.validate();
    c.sampler.validate();
    if (c.eval.k < 1) throw Error(Errc::BadConfig, "eval.k must be >= 1");
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    const std::string text = read_text_file(path);
    Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error(Errc::BadConfig, path + ": not valid JSON");
    try {
        return config_from_json(doc);
    } catch (const Error& e) {
        throw Error(Errc::BadConfig, path + ": " + e.detail());
    }
}

}  // namespace hroute

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/graph.hpp"
#include "hroute/json_util.hpp"
#include "hroute/rng.hpp"
#include "hroute/supervision.hpp"
#include "hroute/turns.hpp"

namespace hroute {

enum class RouterVariant { EmbeddingQ, EmbeddingQH, Llm, Oracle, Random };

constexpr std::string_view to_string(RouterVariant v) noexcept {
    switch (v) {
        case RouterVariant::EmbeddingQ: return "embedding_q";
        case RouterVariant::EmbeddingQH: return "embedding_qh";
        case RouterVariant::Llm: return "llm";
        case RouterVariant::Oracle: return "oracle";
        case RouterVariant::Random: return "random";
    }
    return "?";
}

inline std::optional<RouterVariant> parse_router_variant(std::string_view s) noexcept {
    for (auto v : {RouterVariant::EmbeddingQ, RouterVariant::EmbeddingQH, RouterVariant::Llm, RouterVariant::Oracle, RouterVariant::Random})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

struct RouterConfig {
    RouterVariant variant = RouterVariant::EmbeddingQ;
    CandidateKind kind = CandidateKind::Tool;
    std::string model_id = "mock";
    double temperature = 1.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{60000};
    /// Character budget for the embedded Q+H text; oldest turns go first.
    std::size_t max_request_chars = 4096;
    /// Applied to every embedding score before the argmax.
    std::function<double(double)> score_transform;
};

struct RouterDecision {
    std::string chosen;
    std::vector<std::pair<std::string, double>> ranking;
    std::optional<std::string> rationale;
    bool abstained = false;
    std::string note;

    static RouterDecision abstain(std::string why, std::optional<std::string> raw = std::nullopt) {
        RouterDecision d;
        d.abstained = true;
        d.note = std::move(why);
        d.rationale = std::move(raw);
        return d;
    }
};

struct RouteRequest {
    std::string query;
    std::vector<Turn> history;
    CandidatePool pool;
    /// Only the oracle reads this.
    std::optional<std::string> label;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Decision parsing

struct ParsedDecision {
    std::optional<std::string> name;
    std::string reason;
};

namespace detail {

/// End index (one past ']') of the bracket opened at `open`, honouring
/// JSON strings; npos when unbalanced.
inline std::size_t match_bracket(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[') ++depth;
        else if (c == ']' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

}  // namespace detail

/// Strips one <think>...</think> block, takes the last top-level JSON array
/// of strings, and requires a single element that names a pool member.
/// Never throws.
inline ParsedDecision parse_decision(std::string_view text, const std::vector<std::string>& pool) noexcept {
    try {
        std::string body(text);
        if (const auto close = body.find("</think>"); close != std::string::npos) {
            const auto open = body.rfind("<think>", close);
            const std::size_t from = open == std::string::npos ? 0 : open;
            body.erase(from, close + 8 - from);
        }
        std::optional<Json> last;
        std::size_t i = 0;
        while ((i = body.find('[', i)) != std::string::npos) {
            const auto end = detail::match_bracket(body, i);
            if (end == std::string::npos) {
                ++i;
                continue;
            }
            Json parsed = Json::parse(body.substr(i, end - i), nullptr, false);
            if (parsed.is_discarded() || !parsed.is_array()) {
                ++i;
                continue;
            }
            if (std::all_of(parsed.begin(), parsed.end(), [](const Json& x) { return x.is_string(); })) last = std::move(parsed);
            else last.reset();
            i = end;
        }
        if (!last) return {std::nullopt, "no JSON array of names"};
        if (last->size() != 1) return {std::nullopt, "expected exactly one name, got " + std::to_string(last->size())};
        std::string name = (*last)[0].get<std::string>();
        if (std::find(pool.begin(), pool.end(), name) == pool.end()) return {std::nullopt, "not in pool: " + name};
        return {std::move(name), {}};
    } catch (...) {
        return {std::nullopt, "unparseable reply"};
    }
}

inline ParsedDecision parse_decision(std::string_view text, const CandidatePool& pool) noexcept {
    return parse_decision(text, pool.members);
}

// ---------------------------------------------------------------------------
// Scoring routers

/// Highest score wins; equal scores go to the lexicographically smallest name.
inline RouterDecision decide_argmax(std::vector<std::pair<std::string, double>> ranking) {
    if (ranking.empty()) return RouterDecision::abstain("empty ranking");
    std::stable_sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    RouterDecision d;
    d.chosen = ranking.front().first;
    d.ranking = std::move(ranking);
    return d;
}

/// History in transcript form, a newline, then the query. Whole turns are
/// dropped from the oldest end until the text fits max_chars.
inline std::string qh_request_text(std::string_view query, const std::vector<Turn>& history, CandidateKind kind,
                                   std::size_t max_chars) {
    std::size_t first = 0;
    while (first < history.size()) {
        const std::vector<Turn> kept(history.begin() + static_cast<std::ptrdiff_t>(first), history.end());
        std::string text = render_transcript(kept, kind) + "\n" + std::string(query);
        if (text.size() <= max_chars) return text;
        ++first;
    }
    return std::string(query);
}

enum class EmbeddingMode { Q, QPlusH };

inline RouterDecision embedding_route(std::string_view query, const std::vector<Turn>& history, const CandidatePool& pool,
                                      EmbeddingMode mode, Gateway& gateway, const RouterConfig& cfg = {}) {
    try {
        std::vector<std::string> texts;
        texts.push_back(mode == EmbeddingMode::Q ? std::string(query)
                                                 : qh_request_text(query, history, cfg.kind, cfg.max_request_chars));
        for (const auto& m : pool.members) texts.push_back(serialize_phi(pool.spec(m)));
        const auto embs = gateway.embed_texts(texts);
        std::vector<std::pair<std::string, double>> ranking;
        for (std::size_t i = 0; i < pool.members.size(); ++i) {
            double s = cosine_similarity(embs[0], embs[i + 1]);
            if (cfg.score_transform) s = cfg.score_transform(s);
            ranking.emplace_back(pool.members[i], s);
        }
        return decide_argmax(std::move(ranking));
    } catch (const Error& e) {
        return RouterDecision::abstain(e.what());
    }
}

inline RouterDecision llm_route(std::string_view query, const std::vector<Turn>& history, const CandidatePool& pool,
                                Gateway& gateway, const RouterConfig& cfg, std::uint64_t seed) {
    try {
        const auto prompt = render_router_prompt(query, history, pool, cfg.kind);
        ChatRequest req;
        req.messages = {{Role::System, prompt.system}, {Role::User, prompt.user}};
        req.temperature = cfg.temperature;
        req.max_tokens = cfg.max_tokens;
        req.model_id = cfg.model_id;
        req.seed = seed;
        const std::string reply = gateway.chat(req);
        auto parsed = parse_decision(reply, pool);
        if (!parsed.name) return RouterDecision::abstain(parsed.reason, reply);
        RouterDecision d;
        d.chosen = *parsed.name;
        d.ranking = {{d.chosen, 1.0}};
        d.rationale = reply;
        return d;
    } catch (const Error& e) {
        return RouterDecision::abstain(e.what());
    }
}

namespace detail {

inline RouterDecision route_now(const RouterConfig& cfg, const RouteRequest& req, Gateway& gateway) {
    const auto& pool = req.pool;
    if (pool.members.empty()) return RouterDecision::abstain("empty pool");
    if (pool.size() == 1) {
        RouterDecision d;
        d.chosen = pool.members.front();
        d.ranking = {{d.chosen, 1.0}};
        return d;
    }
    switch (cfg.variant) {
        case RouterVariant::EmbeddingQ: return embedding_route(req.query, req.history, pool, EmbeddingMode::Q, gateway, cfg);
        case RouterVariant::EmbeddingQH: return embedding_route(req.query, req.history, pool, EmbeddingMode::QPlusH, gateway, cfg);
        case RouterVariant::Llm: return llm_route(req.query, req.history, pool, gateway, cfg, req.seed);
        case RouterVariant::Oracle: {
            if (!req.label) return RouterDecision::abstain("oracle without label");
            if (!pool.contains(*req.label)) return RouterDecision::abstain("label not in pool: " + *req.label);
            RouterDecision d;
            d.chosen = *req.label;
            d.ranking = {{d.chosen, 1.0}};
            return d;
        }
        case RouterVariant::Random: {
            Rng rng(derive_seed(req.seed, "random-router"));
            RouterDecision d;
            d.chosen = pool.members[rng.below(pool.size())];
            d.ranking = {{d.chosen, 1.0}};
            return d;
        }
    }
    return RouterDecision::abstain("unknown variant");
}

}  // namespace detail

/// Dispatches to the configured variant. Never throws for gateway or parse
/// failures; those become abstentions. Returns an abstention when the
/// timeout elapses (the worker finishes in the background and is dropped).
/// `gateway` must outlive any timed-out call.
inline RouterDecision route(const RouterConfig& cfg, const RouteRequest& req, Gateway& gateway) {
    if (cfg.timeout.count() <= 0) return detail::route_now(cfg, req, gateway);
    struct Shared {
        std::mutex mu;
        std::condition_variable cv;
        std::optional<RouterDecision> result;
    };
    auto shared = std::make_shared<Shared>();
    std::thread([shared, cfg, req, &gateway] {
        RouterDecision d;
        try {
            d = detail::route_now(cfg, req, gateway);
        } catch (const std::exception& e) {
            d = RouterDecision::abstain(e.what());
        }
        std::lock_guard lock(shared->mu);
        shared->result = std::move(d);
        shared->cv.notify_all();
    }).detach();
    std::unique_lock lock(shared->mu);
    if (!shared->cv.wait_for(lock, cfg.timeout, [&] { return shared->result.has_value(); }))
        return RouterDecision::abstain("timeout after " + std::to_string(cfg.timeout.count()) + " ms");
    return std::move(*shared->result);
}

inline RouterDecision route(const RouterConfig& cfg, std::string_view query, const std::vector<Turn>& history,
                            const CandidatePool& pool, Gateway& gateway, std::optional<std::string> label = std::nullopt,
                            std::uint64_t seed = 0) {
    return route(cfg, RouteRequest{std::string(query), history, pool, std::move(label), seed}, gateway);
}

inline Json to_json(const RouterDecision& d) {
    Json ranking = Json::array();
    for (const auto& [n, s] : d.ranking) ranking.push_back(Json::array({n, s}));
    Json j{{"chosen", d.abstained ? Json(nullptr) : Json(d.chosen)}, {"abstained", d.abstained}, {"ranking", ranking}};
    if (!d.note.empty()) j["note"] = d.note;
    if (d.rationale) j["rationale"] = *d.rationale;
    return j;
}

}  // namespace hroute

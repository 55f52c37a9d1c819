#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hroute/error.hpp"
#include "hroute/graph.hpp"
#include "hroute/json_util.hpp"
#include "hroute/rng.hpp"

namespace hroute {

struct WalkStep {
    std::string from;
    std::string to;
    EdgeKind kind = EdgeKind::Similarity;
    bool operator==(const WalkStep&) const = default;
};

struct CandidateSubset {
    std::vector<std::string> members;
    std::vector<std::string> seed_nodes;
    std::vector<WalkStep> walk_trace;

    bool contains(std::string_view name) const {
        return std::find(members.begin(), members.end(), name) != members.end();
    }
    bool operator==(const CandidateSubset&) const = default;
};

struct SamplerConfig {
    std::size_t num_seeds = 1;
    /// Fixed size when set; otherwise drawn uniformly from [min_size, max_size].
    std::optional<std::size_t> target_size;
    std::size_t min_size = 4;
    std::size_t max_size = 8;
    double restart_prob = 0.15;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (num_seeds < 1) throw Error(Errc::BadConfig, "num_seeds must be >= 1");
        if (restart_prob < 0.0 || restart_prob > 1.0) throw Error(Errc::BadConfig, "restart_prob must lie in [0, 1]");
        if (target_size) {
            if (*target_size < num_seeds) throw Error(Errc::BadConfig, "target_size must be >= num_seeds");
        } else if (min_size < num_seeds || max_size < min_size) {
            throw Error(Errc::BadConfig, "size range must satisfy num_seeds <= min_size <= max_size");
        }
    }
};

/// Grows a subset by randomized depth-first traversal over both edge kinds.
/// At each expansion, with probability restart_prob the walk backtracks to
/// the most recent earlier branch point that still has unvisited neighbors.
/// When the reachable component is exhausted before the target size, an
/// extra uniform seed is drawn from the unvisited nodes.
inline CandidateSubset sample_subset(const CandidateGraph& graph, const SamplerConfig& cfg) {
    cfg.validate();
    if (graph.empty()) throw Error(Errc::EmptyGraph, "cannot sample from an empty graph");
    Rng rng(cfg.rng_seed);
    const std::size_t target = cfg.target_size ? *cfg.target_size
                                               : static_cast<std::size_t>(rng.between(
                                                     static_cast<std::int64_t>(cfg.min_size),
                                                     static_cast<std::int64_t>(cfg.max_size)));
    const auto all = graph.names();
    CandidateSubset out;
    std::set<std::string> visited;

    auto unvisited_neighbors = [&](const std::string& name) {
        std::vector<Neighbor> nbs;
        for (auto& nb : graph.neighbors(name))
            if (!visited.count(nb.name)) nbs.push_back(nb);
        return nbs;
    };

    auto draw_seed = [&]() -> std::optional<std::string> {
        std::vector<std::string> pool;
        for (const auto& n : all)
            if (!visited.count(n)) pool.push_back(n);
        if (pool.empty()) return std::nullopt;
        return pool[rng.below(pool.size())];
    };

    auto grow_from = [&](const std::string& seed) {
        std::vector<std::string> stack{seed};
        while (out.members.size() < target) {
            if (stack.empty()) {
                // Resume from the earliest member that still has a frontier.
                for (const auto& m : out.members) {
                    if (!unvisited_neighbors(m).empty()) {
                        stack.push_back(m);
                        break;
                    }
                }
                if (stack.empty()) return;
            }
            if (stack.size() > 1 && rng.bernoulli(cfg.restart_prob)) {
                for (std::size_t i = stack.size() - 1; i-- > 0;) {
                    if (!unvisited_neighbors(stack[i]).empty()) {
                        stack.resize(i + 1);
                        break;
                    }
                }
            }
            const std::string cur = stack.back();
            auto nbs = unvisited_neighbors(cur);
            if (nbs.empty()) {
                stack.pop_back();
                continue;
            }
            const Neighbor next = nbs[rng.below(nbs.size())];
            visited.insert(next.name);
            out.members.push_back(next.name);
            out.walk_trace.push_back({cur, next.name, next.kind});
            stack.push_back(next.name);
        }
    };

    std::vector<std::string> initial_seeds;
    for (std::size_t s = 0; s < cfg.num_seeds; ++s) {
        auto seed = draw_seed();
        if (!seed) break;
        visited.insert(*seed);
        initial_seeds.push_back(*seed);
    }
    for (const auto& seed : initial_seeds) {
        out.seed_nodes.push_back(seed);
        out.members.push_back(seed);
    }
    for (const auto& seed : initial_seeds) {
        if (out.members.size() >= target) break;
        grow_from(seed);
    }
    while (out.members.size() < target) {
        auto seed = draw_seed();
        if (!seed) break;
        visited.insert(*seed);
        out.seed_nodes.push_back(*seed);
        out.members.push_back(*seed);
        grow_from(*seed);
    }
    return out;
}

inline Json to_json(const CandidateSubset& s) {
    Json trace = Json::array();
    for (const auto& w : s.walk_trace) trace.push_back(Json::array({w.from, w.to, std::string(to_string(w.kind))}));
    return Json{{"members", s.members}, {"seed_nodes", s.seed_nodes}, {"walk_trace", trace}};
}

inline CandidateSubset subset_from_json(const Json& j) {
    CandidateSubset s;
    s.members = j.at("members").get<std::vector<std::string>>();
    s.seed_nodes = j.value("seed_nodes", std::vector<std::string>{});
    if (auto t = j.find("walk_trace"); t != j.end()) {
        for (const auto& w : *t) {
            const std::string kind = w.at(2).get<std::string>();
            s.walk_trace.push_back({w.at(0).get<std::string>(), w.at(1).get<std::string>(),
                                    kind == "mutation" ? EdgeKind::Mutation : EdgeKind::Similarity});
        }
    }
    return s;
}

}  // namespace hroute

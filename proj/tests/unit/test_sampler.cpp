#include <gtest/gtest.h>

#include <functional>

#include "fixtures.hpp"

using namespace hroute;
using fixtures::make_tool;

namespace {

CandidateGraph planted_graph(const std::map<std::string, std::vector<double>>& vecs, double tau) {
    CandidateBank bank(CandidateKind::Tool);
    for (const auto& [n, _] : vecs) bank.insert(make_tool(n, "node " + n));
    auto gw = fixtures::planted_gateway(vecs, vecs.begin()->second.size());
    return build_graph(bank, GraphConfig{tau, ""}, *gw);
}

const CandidateGraph& evolved_60() {
    static const CandidateGraph g = [] {
        auto gw = make_mock_gateway(21);
        EvolveConfig cfg;
        cfg.seed = 21;
        return evolve(build_graph(load_bank(std::string(HROUTE_DATA_DIR) + "/seed_tools.jsonl"), {}, *gw), 40, cfg, *gw).graph;
    }();
    return g;
}

// Every member is a seed or reached through the recorded trace, and each
// non-seed member is the target of exactly one trace step.
void expect_trace_closed(const CandidateSubset& s) {
    std::set<std::string> reached(s.seed_nodes.begin(), s.seed_nodes.end());
    std::map<std::string, int> as_target;
    for (const auto& w : s.walk_trace) {
        EXPECT_TRUE(reached.count(w.from)) << w.from;
        reached.insert(w.to);
        ++as_target[w.to];
    }
    for (const auto& m : s.members) {
        EXPECT_TRUE(reached.count(m)) << m;
        const bool seed = std::find(s.seed_nodes.begin(), s.seed_nodes.end(), m) != s.seed_nodes.end();
        EXPECT_EQ(as_target[m], seed ? 0 : 1) << m;
    }
    EXPECT_EQ(std::set<std::string>(s.members.begin(), s.members.end()).size(), s.members.size());
}

}  // namespace

TEST(Sampler, IsolatedSeedYieldsSingleton) {
    auto g = planted_graph({{"solo", {1, 0}}}, 0.82);
    SamplerConfig cfg;
    cfg.target_size = 3;
    auto s = sample_subset(g, cfg);
    EXPECT_EQ(s.members, std::vector<std::string>{"solo"});
    EXPECT_TRUE(s.walk_trace.empty());
}

TEST(Sampler, PathGraphForcedTraversal) {
    auto g = planted_graph({{"a", {1, 0, 0}}, {"b", {1, 1, 0}}, {"c", {0, 1, 0}}}, 0.5);
    ASSERT_TRUE(g.has_edge("a", "b", EdgeKind::Similarity));
    ASSERT_TRUE(g.has_edge("b", "c", EdgeKind::Similarity));
    ASSERT_FALSE(g.has_edge("a", "c", EdgeKind::Similarity));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SamplerConfig cfg;
        cfg.target_size = 3;
        cfg.rng_seed = seed;
        auto s = sample_subset(g, cfg);
        std::set<std::string> members(s.members.begin(), s.members.end());
        EXPECT_EQ(members, (std::set<std::string>{"a", "b", "c"}));
        EXPECT_EQ(s.seed_nodes.size(), 1u);
        expect_trace_closed(s);
    }
}

TEST(Sampler, ConfigAndGraphErrors) {
    SamplerConfig bad;
    bad.num_seeds = 3;
    bad.target_size = 2;
    auto g = planted_graph({{"a", {1, 0}}}, 0.82);
    try {
        sample_subset(g, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BadConfig);
    }
    try {
        sample_subset(CandidateGraph{}, SamplerConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyGraph);
    }
}

TEST(Sampler, Deterministic) {
    SamplerConfig cfg;
    cfg.rng_seed = 77;
    EXPECT_EQ(sample_subset(evolved_60(), cfg), sample_subset(evolved_60(), cfg));
}

TEST(Sampler, ConnectedWithinTraceOverThousandSamples) {
    const auto& g = evolved_60();
    ASSERT_EQ(g.size(), 60u);
    for (std::uint64_t i = 0; i < 1000; ++i) {
        SamplerConfig cfg;
        cfg.target_size = 6;
        cfg.rng_seed = i;
        auto s = sample_subset(g, cfg);
        ASSERT_EQ(s.members.size(), 6u);
        // Each trace step follows a real edge.
        for (const auto& w : s.walk_trace) ASSERT_TRUE(g.has_edge(w.from, w.to, w.kind)) << w.from << "-" << w.to;
        // Union-find over trace edges: one component per seed node.
        std::map<std::string, std::string> parent;
        std::function<std::string(const std::string&)> find = [&](const std::string& x) {
            auto it = parent.find(x);
            if (it == parent.end() || it->second == x) return x;
            return it->second = find(it->second);
        };
        for (const auto& m : s.members) parent[m] = m;
        for (const auto& w : s.walk_trace) parent[find(w.to)] = find(w.from);
        std::set<std::string> roots;
        for (const auto& m : s.members) roots.insert(find(m));
        ASSERT_EQ(roots.size(), s.seed_nodes.size());
        expect_trace_closed(s);
    }
}

TEST(Sampler, SizeBoundsAndFullSizeWhenComponentIsLarge) {
    auto g = planted_graph({{"a", {1, 0}}, {"b", {1, 0.1}}, {"c", {1, 0.2}}, {"d", {1, 0.3}}, {"x", {0, 1}}}, 0.82);
    for (std::uint64_t i = 0; i < 100; ++i) {
        SamplerConfig cfg;
        cfg.rng_seed = i;
        cfg.min_size = 2;
        cfg.max_size = 4;
        auto s = sample_subset(g, cfg);
        EXPECT_GE(s.members.size(), 2u);
        EXPECT_LE(s.members.size(), 4u);
        expect_trace_closed(s);
    }
    // Shortfall on a disconnected graph draws extra seeds until exhausted.
    SamplerConfig all;
    all.target_size = 5;
    auto s = sample_subset(g, all);
    EXPECT_EQ(s.members.size(), 5u);
    EXPECT_EQ(s.seed_nodes.size(), 2u);
}

TEST(Sampler, JsonRoundTrip) {
    SamplerConfig cfg;
    cfg.rng_seed = 4;
    auto s = sample_subset(evolved_60(), cfg);
    EXPECT_EQ(subset_from_json(to_json(s)), s);
}

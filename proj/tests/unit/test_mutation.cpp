#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "fixtures.hpp"

using namespace hroute;
using fixtures::make_tool;

namespace {

CandidateBank seed_bank() { return load_bank(std::string(HROUTE_DATA_DIR) + "/seed_tools.jsonl"); }

CandidateGraph seed_graph(Gateway& gw) { return build_graph(seed_bank(), {}, gw); }

CandidateSpec strict_agent() {
    return validate_spec(Json::parse(R"({
        "name": "report_agent", "description": "Writes reports", "tools": ["outline", "draft", "review"],
        "inputSchema": {"type": "object", "properties": {"topic": {"type": "string", "description": "Report topic"}}},
        "tags": ["writing agent"]})"),
                         CandidateKind::Agent);
}

}  // namespace

TEST(PickMutation, SingleNodeGraph) {
    auto gw = make_mock_gateway(1);
    CandidateBank bank(CandidateKind::Tool);
    bank.insert(make_tool("lonely", "d"));
    auto g = build_graph(bank, {}, *gw);
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto c = pick_mutation(g, s);
        EXPECT_EQ(c.candidate, "lonely");
        EXPECT_EQ(operator_info(c.op).family, CandidateKind::Tool);
    }
    EXPECT_EQ(pick_mutation(g, 5), pick_mutation(g, 5));
}

TEST(PickMutation, EmptyGraph) {
    try {
        pick_mutation(CandidateGraph{}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyGraph);
    }
}

TEST(PickMutation, UniformOverNodesWithinThreeSigma) {
    auto gw = make_mock_gateway(1);
    auto g = build_graph(fixtures::synthetic_bank(5, 2), {}, *gw);
    Rng rng(99);
    std::map<std::string, int> freq;
    std::map<MutationOperator, int> ops;
    for (int i = 0; i < 10000; ++i) {
        auto c = pick_mutation(g, CandidateKind::Tool, rng);
        ++freq[c.candidate];
        ++ops[c.op];
    }
    const double sigma = std::sqrt(10000 * 0.2 * 0.8);
    ASSERT_EQ(freq.size(), 5u);
    for (const auto& [name, n] : freq) EXPECT_NEAR(n, 2000, 3 * sigma) << name;
    EXPECT_EQ(ops.size(), 5u);
}

TEST(MutationPrompt, ToolTemplateSubstitution) {
    auto base = make_tool("web_lookup", "Look things up", Json::object(), Json::array(), {"General"});
    auto req = render_mutation_prompt(base, MutationOperator::FunctionEnhancement);
    ASSERT_EQ(req.messages.size(), 1u);
    const auto& p = req.messages[0].content;
    EXPECT_NE(p.find("Function Enhancement"), std::string::npos);
    EXPECT_NE(p.find("web_lookup"), std::string::npos);
    EXPECT_NE(p.find("Keep the same domain tags: [\"General\"]"), std::string::npos);
    EXPECT_NE(p.find(std::string(prompts::kMutationMarker)), std::string::npos);
}

TEST(MutationPrompt, AgentTemplateRequiresSuffix) {
    auto req = render_mutation_prompt(strict_agent(), MutationOperator::DomainTransfer);
    const auto& p = req.messages[0].content;
    EXPECT_NE(p.find("Agent name MUST end with \"_agent\""), std::string::npos);
    EXPECT_NE(p.find("report_agent"), std::string::npos);
}

TEST(MutationPrompt, FamilyMismatch) {
    try {
        render_mutation_prompt(make_tool("t", "d"), MutationOperator::DomainTransfer);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::FamilyMismatch);
    }
}

TEST(ParseMutant, HappyPathStampsProvenance) {
    auto base = make_tool("base_tool", "d", Json::object(), Json::array(), {"General"});
    auto m = parse_mutant(R"({"name":"base_tool_v2","description":"better","inputSchema":{"type":"object","properties":{}},"tags":["General"]})",
                          CandidateKind::Tool, base, MutationOperator::HelperTool);
    EXPECT_TRUE(m.provenance().is_mutant());
    EXPECT_EQ(*m.provenance().parent_name, "base_tool");
    EXPECT_EQ(*m.provenance().op, MutationOperator::HelperTool);
}

TEST(ParseMutant, FencedBodyAccepted) {
    auto base = make_tool("base_tool", "d");
    EXPECT_NO_THROW(parse_mutant("```json\n{\"name\":\"x2\",\"description\":\"d\",\"inputSchema\":{\"type\":\"object\"},\"tags\":[\"General\"]}\n```",
                                 CandidateKind::Tool, base, MutationOperator::UsageExtension));
}

TEST(ParseMutant, Rejections) {
    auto base = make_tool("base_tool", "d", Json::object(), Json::array(), {"General"});
    auto code = [&](const std::string& text, CandidateKind kind, const CandidateSpec& b) {
        try {
            parse_mutant(text, kind, b, kind == CandidateKind::Tool ? MutationOperator::UsageExtension : MutationOperator::DomainTransfer);
        } catch (const Error& e) {
            return std::make_pair(e.code(), e.cause());
        }
        return std::make_pair(Errc::IoError, std::optional<Errc>());
    };
    EXPECT_EQ(code("not json at all", CandidateKind::Tool, base).first, Errc::NotParseable);
    EXPECT_EQ(code(R"({"name":"base_tool","description":"d","inputSchema":{"type":"object"},"tags":["General"]})", CandidateKind::Tool, base).first,
              Errc::NameEqualsParent);
    EXPECT_EQ(code(R"({"name":"other","description":"d","inputSchema":{"type":"object"},"tags":["Finance"]})", CandidateKind::Tool, base).first,
              Errc::TagMismatch);
    auto agent = code(R"({"name":"data_helper","description":"d","tools":["a"],"inputSchema":{"type":"object","properties":{}},"tags":["x agent"]})",
                      CandidateKind::Agent, strict_agent());
    EXPECT_EQ(agent.first, Errc::ValidationError);
    EXPECT_EQ(agent.second, Errc::BadAgentName);
}

TEST(Evolve, ZeroRoundsIsIdentity) {
    auto gw = make_mock_gateway(3);
    auto g = seed_graph(*gw);
    auto r = evolve(g, 0, {}, *gw);
    EXPECT_TRUE(r.records.empty());
    EXPECT_EQ(render_graph(r.graph), render_graph(g));
    EXPECT_THROW(evolve(g, -1, {}, *gw), Error);
}

TEST(Evolve, SeededMockBuildsMutationForest) {
    auto gw = make_mock_gateway(21);
    auto g = seed_graph(*gw);
    EvolveConfig cfg;
    cfg.seed = 21;
    auto r = evolve(g, 40, cfg, *gw);
    ASSERT_FALSE(r.aborted);
    EXPECT_EQ(r.accepted(), 40u);
    EXPECT_EQ(r.graph.size(), 60u);
    EXPECT_EQ(r.graph.count_edges(EdgeKind::Mutation), 40u);
    for (const auto& n : r.graph.nodes()) {
        const auto& name = n.spec.name();
        if (!n.spec.provenance().is_mutant()) {
            EXPECT_EQ(r.graph.parent_degree(name), 0u);
            continue;
        }
        EXPECT_EQ(r.graph.parent_degree(name), 1u) << name;
        EXPECT_TRUE(r.graph.has_edge(name, *n.spec.provenance().parent_name, EdgeKind::Mutation));
        // Strictly valid and tag-preserving against its parent.
        EXPECT_NO_THROW(validate_spec(to_json(n.spec), CandidateKind::Tool));
        EXPECT_EQ(n.spec.tags(), r.graph.node(*n.spec.provenance().parent_name).spec.tags());
    }
}

TEST(Evolve, DeterministicAcrossRuns) {
    auto run = [] {
        auto gw = make_mock_gateway(5);
        EvolveConfig cfg;
        cfg.seed = 5;
        auto r = evolve(seed_graph(*gw), 15, cfg, *gw);
        std::string log;
        for (const auto& rec : r.records) log += dump_line(to_json(rec)) + "\n";
        return render_graph(r.graph) + render_bank(r.graph.to_bank()) + log;
    };
    EXPECT_EQ(run(), run());
}

TEST(Evolve, RejectedRoundsAreRecordedAfterRetries) {
    std::shared_ptr<MockChatBackend> chat;
    auto gw = make_mock_gateway(2, {}, &chat);
    chat->set_handler([](const ChatRequest&) { return std::optional<std::string>("definitely not json"); });
    auto g = seed_graph(*gw);
    EvolveConfig cfg;
    cfg.max_retries = 2;
    auto r = evolve(g, 3, cfg, *gw);
    ASSERT_EQ(r.records.size(), 3u);
    for (const auto& rec : r.records) {
        EXPECT_FALSE(rec.accepted);
        EXPECT_EQ(rec.attempts, 3);
        ASSERT_TRUE(rec.reject_reason);
        EXPECT_NE(rec.reject_reason->find("NotParseable"), std::string::npos);
    }
    EXPECT_EQ(r.graph.size(), g.size());
}

TEST(Evolve, GatewayFailureAbortsWithPartialResult) {
    std::shared_ptr<MockChatBackend> chat;
    GatewayConfig cfg;
    cfg.max_chat_calls = 4;
    auto gw = make_mock_gateway(2, cfg, &chat);
    auto g = seed_graph(*gw);
    auto r = evolve(g, 10, {}, *gw);
    ASSERT_TRUE(r.aborted);
    EXPECT_EQ(r.aborted->code(), Errc::BudgetExceeded);
    EXPECT_EQ(r.graph.size(), g.size() + r.accepted());
    EXPECT_LT(r.records.size(), 10u);
}

TEST(Evolve, AgentGraphsMutateIntoValidAgents) {
    auto gw = make_mock_gateway(8);
    CandidateBank bank(CandidateKind::Agent);
    bank.insert(strict_agent());
    auto r = evolve(build_graph(bank, {}, *gw), 6, {}, *gw);
    EXPECT_EQ(r.accepted(), 6u);
    for (const auto& n : r.graph.nodes()) {
        EXPECT_TRUE(n.spec.name().ends_with("_agent"));
        EXPECT_NO_THROW(validate_spec(to_json(n.spec), CandidateKind::Agent));
    }
}

TEST(Evolve, FullScaleGrowth) {
    // 627 seeds grown to 2,005 candidates: 1,378 accepted mutations.
    auto gw = make_mock_gateway(6);
    auto g = build_graph(fixtures::synthetic_bank(627, 6), {}, *gw);
    EvolveConfig cfg;
    cfg.seed = 6;
    auto r = evolve(g, 1378, cfg, *gw);
    ASSERT_FALSE(r.aborted);
    EXPECT_EQ(r.accepted(), 1378u);
    EXPECT_EQ(r.graph.size(), 2005u);
    EXPECT_EQ(r.graph.count_edges(EdgeKind::Mutation), 1378u);
}

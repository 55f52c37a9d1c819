#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"

using namespace hroute;
using fixtures::make_tool;

namespace {

CandidateBank named_bank(const std::vector<std::string>& names) {
    CandidateBank bank(CandidateKind::Tool);
    for (const auto& n : names) bank.insert(make_tool(n, "candidate " + n));
    return bank;
}

// Integer vectors whose cosine against (1,0,0,0,0) is exactly the target:
// the first component divided by the (integer) norm.
const std::vector<double> kHi{1, 0, 0, 0, 0};
const std::vector<double> kAt082{41, 17, 23, 1, 0};   // norm 50
const std::vector<double> kAt083{83, 54, 13, 5, 1};   // norm 100
const std::vector<double> kAt081{81, 58, 7, 5, 1};    // norm 100

}  // namespace

TEST(Cosine, HandComputedValues) {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    EXPECT_NEAR(cosine_similarity(a, b), 32.0 / (std::sqrt(14.0) * std::sqrt(77.0)), 1e-12);
    EXPECT_NEAR(cosine_similarity(a, b), 0.974631, 1e-6);
    EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
}

TEST(Cosine, PlantedThresholdVectorsAreExact) {
    EXPECT_EQ(cosine_similarity(kHi, kAt082), 0.82);
    EXPECT_EQ(cosine_similarity(kHi, kAt083), 0.83);
    EXPECT_EQ(cosine_similarity(kHi, kAt081), 0.81);
}

TEST(Cosine, Errors) {
    try {
        cosine_similarity(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DimensionMismatch);
    }
    try {
        cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ZeroVector);
    }
}

TEST(BuildGraph, SingleCandidate) {
    auto gw = make_mock_gateway(1);
    auto g = build_graph(named_bank({"only"}), {}, *gw);
    EXPECT_EQ(g.size(), 1u);
    EXPECT_TRUE(g.edges().empty());
}

TEST(BuildGraph, EmptyBankAndBadTau) {
    auto gw = make_mock_gateway(1);
    try {
        build_graph(CandidateBank(CandidateKind::Tool), {}, *gw);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyBank);
    }
    EXPECT_THROW(build_graph(named_bank({"a"}), GraphConfig{1.0, ""}, *gw), Error);
}

TEST(BuildGraph, IdenticalPhiGivesWeightOne) {
    auto gw = fixtures::planted_gateway({{"a", {0.3, 0.4}}, {"b", {0.3, 0.4}}}, 2);
    auto g = build_graph(named_bank({"a", "b"}), {}, *gw);
    ASSERT_EQ(g.edges().size(), 1u);
    EXPECT_DOUBLE_EQ(*g.edges().begin()->weight, 1.0);
}

TEST(BuildGraph, StrictThresholdAtPointEightTwo) {
    auto gw = fixtures::planted_gateway({{"hi", kHi}, {"at082", kAt082}, {"at083", kAt083}, {"at081", kAt081}}, 5);
    auto g = build_graph(named_bank({"hi", "at082", "at083", "at081"}), GraphConfig{0.82, ""}, *gw);
    EXPECT_TRUE(g.has_edge("hi", "at083", EdgeKind::Similarity));
    EXPECT_FALSE(g.has_edge("hi", "at082", EdgeKind::Similarity));
    EXPECT_FALSE(g.has_edge("hi", "at081", EdgeKind::Similarity));
}

TEST(BuildGraph, MatchesBruteForceOracle) {
    auto bank = fixtures::synthetic_bank(200, 17);
    auto gw = make_mock_gateway(17);
    auto g = build_graph(bank, {}, *gw);
    MockEmbeddingBackend ref(17);
    std::vector<std::vector<double>> vecs;
    for (const auto& e : bank.entries()) vecs.push_back(ref.embed_one(serialize_phi(e)));
    const auto expected = fixtures::brute_force_edges(bank.names(), vecs, 0.82);
    EXPECT_EQ(fixtures::similarity_edges(g), expected);
    EXPECT_GT(expected.size(), 0u);
}

TEST(BuildGraph, CanonicalEdgesAndSoundness) {
    auto bank = fixtures::synthetic_bank(80, 3);
    auto gw = make_mock_gateway(3);
    auto g = build_graph(bank, {}, *gw);
    for (const auto& e : g.edges()) {
        EXPECT_LT(e.a, e.b);
        const double s = cosine_similarity(g.node(e.a).embedding, g.node(e.b).embedding);
        EXPECT_GT(s, g.config().tau);
        EXPECT_EQ(*e.weight, s);
        EXPECT_TRUE(g.has_edge(e.b, e.a, EdgeKind::Similarity));
    }
}

TEST(BuildGraph, RaisingTauNeverAddsEdges) {
    auto bank = fixtures::synthetic_bank(60, 8);
    auto gw = make_mock_gateway(8);
    std::set<std::pair<std::string, std::string>> prev;
    bool first = true;
    for (double tau : {0.3, 0.5, 0.7, 0.82, 0.9}) {
        auto edges = fixtures::similarity_edges(build_graph(bank, GraphConfig{tau, ""}, *gw));
        if (!first) EXPECT_TRUE(std::includes(prev.begin(), prev.end(), edges.begin(), edges.end()));
        prev = edges;
        first = false;
    }
}

TEST(AddMutant, IntoSingleNodeGraph) {
    auto gw = make_mock_gateway(2);
    auto g = build_graph(named_bank({"base"}), {}, *gw);
    auto spec = make_tool("child", "candidate base");
    spec.set_provenance(Provenance::mutant("base", MutationOperator::UsageExtension));
    auto g2 = add_mutant(g, "base", spec, gw->embed_text(serialize_phi(spec)));
    EXPECT_EQ(g2.size(), 2u);
    EXPECT_GE(g2.edges().size(), 1u);
    EXPECT_EQ(g2.count_edges(EdgeKind::Mutation), 1u);
    EXPECT_EQ(g.size(), 1u);  // value semantics
}

TEST(AddMutant, ErrorsLeaveGraphUntouched) {
    auto gw = make_mock_gateway(2);
    auto g = build_graph(named_bank({"base", "other"}), {}, *gw);
    const auto before = g.edges();
    try {
        insert_mutant(g, "base", make_tool("other", "x"), gw->embed_text("x"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DuplicateName);
    }
    try {
        insert_mutant(g, "ghost", make_tool("new", "x"), gw->embed_text("x"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownParent);
    }
    EXPECT_EQ(g.size(), 2u);
    EXPECT_EQ(g.edges(), before);
}

TEST(AddMutant, GetsSimilarityEdgesAndKeepsOldEdges) {
    auto gw = fixtures::planted_gateway({{"a", {1, 0}}, {"b", {0, 1}}, {"m", {0.01, 1}}}, 2);
    auto g = build_graph(named_bank({"a", "b"}), {}, *gw);
    const auto before = g.edges();
    auto m = make_tool("m", "x");
    insert_mutant(g, "a", m, gw->embed_text(serialize_phi(m)));
    EXPECT_TRUE(g.has_edge("a", "m", EdgeKind::Mutation));
    EXPECT_TRUE(g.has_edge("b", "m", EdgeKind::Similarity));
    EXPECT_FALSE(g.has_edge("a", "m", EdgeKind::Similarity));
    for (const auto& e : before) EXPECT_TRUE(g.edges().count(e));
}

TEST(GraphSnapshot, RoundTripWithoutReembedding) {
    auto bank = fixtures::synthetic_bank(30, 4);
    auto gw = make_mock_gateway(4);
    auto g = build_graph(bank, {}, *gw);
    const auto path = (std::filesystem::temp_directory_path() / "hroute_graph_rt.jsonl").string();
    save_graph_with_bank(g, path);
    auto loaded = load_graph_with_bank(path);
    EXPECT_EQ(loaded.size(), g.size());
    EXPECT_EQ(loaded.edges(), g.edges());
    EXPECT_EQ(render_graph(loaded), render_graph(g));
    std::filesystem::remove(path);
    std::filesystem::remove(companion_bank_path(path));
}

TEST(GraphSnapshot, BadLineReportsLocation) {
    CandidateCatalog empty;
    try {
        parse_graph("{\"format\":\"candidate-graph\",\"tau\":0.82}\n{\"node\":\"missing\",\"embedding\":[1]}\n", empty, "g.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
        EXPECT_NE(std::string(e.what()).find("g.jsonl:2"), std::string::npos);
    }
}

#include <gtest/gtest.h>

#include <filesystem>

#include "fixtures.hpp"

using namespace hroute;
using fixtures::scripted_trajectory;

namespace {

std::size_t occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

const std::vector<std::string> kNames{"alpha_tool", "beta_tool", "gamma_tool", "delta_tool"};

}  // namespace

TEST(Extract, FirstActionHasEmptyHistory) {
    auto t = scripted_trajectory("t0", {"U:find alpha", "A:calling|alpha_tool", "R:alpha ok", "A:done"}, kNames);
    auto inst = extract_instances(t, fixtures::name_pool(kNames));
    ASSERT_EQ(inst.size(), 1u);
    EXPECT_EQ(inst[0].query, "find alpha");
    EXPECT_TRUE(inst[0].history.empty());
    EXPECT_EQ(inst[0].label, "alpha_tool");
    EXPECT_EQ(inst[0].origin.step, 1u);
}

TEST(Extract, LaterActionsCarryPriorTurns) {
    auto t = scripted_trajectory("t1",
                                 {"U:first", "A:a|alpha_tool", "R:alpha result", "A:then|beta_tool,gamma_tool", "R:both", "A:done"},
                                 kNames);
    auto inst = extract_instances(t, fixtures::name_pool(kNames));
    ASSERT_EQ(inst.size(), 3u);
    EXPECT_EQ(inst[1].query, "Tool results: alpha result");
    ASSERT_EQ(inst[1].history.size(), 2u);
    EXPECT_EQ(inst[1].history[0], t.turns[0]);
    EXPECT_EQ(inst[1].history[1], t.turns[1]);
    // Two calls in one action share (Q, H) and differ in label.
    EXPECT_EQ(inst[1].query, inst[2].query);
    EXPECT_EQ(inst[1].history, inst[2].history);
    EXPECT_EQ(inst[1].label, "beta_tool");
    EXPECT_EQ(inst[2].label, "gamma_tool");
}

TEST(Extract, NoCallsNoInstances) {
    auto t = scripted_trajectory("t", {"U:hello", "A:hi there"}, kNames);
    EXPECT_TRUE(extract_instances(t, fixtures::name_pool(kNames)).empty());
}

TEST(Extract, LabelOutsidePoolIsAnError) {
    auto t = scripted_trajectory("t", {"U:x", "A:x|alpha_tool", "R:r", "A:done"}, kNames);
    try {
        extract_instances(t, fixtures::name_pool({"beta_tool"}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::PoolMissingLabel);
    }
}

TEST(Extract, StripHistoryIsIdempotent) {
    auto t = scripted_trajectory("t", {"U:a", "A:x|alpha_tool", "R:r", "A:y|beta_tool", "R:r2", "A:done"}, kNames);
    auto inst = extract_instances(t, fixtures::name_pool(kNames));
    auto once = strip_history(inst[1]);
    auto twice = strip_history(once);
    EXPECT_TRUE(once.history.empty());
    EXPECT_EQ(once.query, twice.query);
    EXPECT_EQ(once.label, inst[1].label);
    EXPECT_EQ(render_sample(once, CandidateKind::Tool).user, render_sample(twice, CandidateKind::Tool).user);
}

TEST(Render, EmptyHistoryAndBlocks) {
    auto t = scripted_trajectory("t", {"U:find alpha", "A:calling|alpha_tool", "R:ok", "A:done"}, kNames);
    auto s = render_sample(extract_instances(t, fixtures::name_pool(kNames))[0], CandidateKind::Tool);
    EXPECT_NE(s.system.find("5. Output strictly in the required format: [\"tool_name\"], no extra commentary."), std::string::npos);
    EXPECT_NE(s.system.find("You are a Tool Router."), std::string::npos);
    EXPECT_NE(s.user.find("<history></history>"), std::string::npos);
    EXPECT_NE(s.user.find("<current query>\"find alpha\"</current query>"), std::string::npos);
    for (const auto& n : kNames) EXPECT_EQ(occurrences(s.user, "\"name\": \"" + n + "\""), 1u) << n;
    EXPECT_EQ(s.expected, std::vector<std::string>{"alpha_tool"});
}

TEST(Render, AgentSampleMatchesReferenceLayout) {
    auto bank = load_bank(std::string(HROUTE_DATA_DIR) + "/agents.json", CandidateKind::Agent, ValidationMode::Lenient);
    auto catalog = std::make_shared<CandidateCatalog>(bank);
    auto pool = CandidatePool::make(catalog, {"risk_management_agent", "economy_forecasting_agent"});
    Trajectory t;
    t.id = "econ";
    t.subset.members = {"economy_forecasting_agent"};
    Action a;
    a.content = "I will run a forecast.";
    a.calls.push_back({"economy_forecasting_agent", Json{{"forecast_horizon", 5}}, "ok"});
    t.turns = {Observation::user("Forecast the economy for the next five years"), a, Observation::tool({"done"}), Action{"Done.", {}}};
    const auto s = render_sample(extract_instances(t, pool)[0], CandidateKind::Agent);
    EXPECT_NE(s.system.find("You are an Agent Router."), std::string::npos);
    EXPECT_NE(s.system.find("5. Output strictly in the required format: [\"agent_name\"], no extra commentary."), std::string::npos);
    EXPECT_NE(s.user.find("Below are examples of the user's past interactions, including queries and system responses:\n<history></history>"),
              std::string::npos);
    EXPECT_NE(s.user.find("<agents>"), std::string::npos);
    EXPECT_NE(s.user.find("\"tools\": ["), std::string::npos);
    EXPECT_NE(s.user.find("[\"agent_name\"]\n###"), std::string::npos);
    const Json rec = to_json(s, CandidateKind::Agent);
    EXPECT_EQ(rec["expected_agent"], Json::array({"economy_forecasting_agent"}));
    EXPECT_FALSE(rec.contains("group"));
}

TEST(Render, HistoryFidelityRoundTrip) {
    auto t = scripted_trajectory("t",
                                 {"U:first ask", "A:working|alpha_tool", "R:alpha said hi", "A:next|beta_tool", "R:beta said yo",
                                  "A:ok no calls", "U:now gamma please", "A:sure|gamma_tool", "R:g", "A:done"},
                                 kNames);
    const auto pool = fixtures::name_pool(kNames);
    for (const auto& inst : extract_instances(t, pool)) {
        const auto back = parse_rendered_sample(to_json(render_sample(inst, CandidateKind::Tool), CandidateKind::Tool));
        EXPECT_EQ(back.query, inst.query);
        EXPECT_EQ(render_transcript(back.history), render_transcript(inst.history));
        EXPECT_EQ(back.label, inst.label);
        EXPECT_EQ(back.pool.members, pool.members);
    }
}

TEST(Render, MalformedRecordIsDatasetFormat) {
    try {
        parse_rendered_sample(Json{{"system", "s"}, {"user", "no blocks here"}, {"expected_tool", {"x"}}}, "d.jsonl:3");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DatasetFormat);
        EXPECT_NE(std::string(e.what()).find("d.jsonl:3"), std::string::npos);
    }
}

TEST(PoolFor, ContainsSubsetAndIsSeeded) {
    auto catalog = std::make_shared<CandidateCatalog>(fixtures::synthetic_bank(30, 1));
    Trajectory t;
    t.id = "p";
    t.subset.members = {"cand_003", "cand_007"};
    auto p = pool_for(t, catalog, 10, 5);
    EXPECT_EQ(p.size(), 10u);
    EXPECT_TRUE(p.contains("cand_003"));
    EXPECT_TRUE(p.contains("cand_007"));
    EXPECT_EQ(pool_for(t, catalog, 10, 5).members, p.members);
    EXPECT_EQ(pool_for(t, catalog, 100, 5).size(), 30u);
}

TEST(Dataset, CountsAndAblationTwins) {
    std::vector<Trajectory> trajs;
    std::vector<CandidatePool> pools;
    std::size_t expected_calls = 0;
    for (int i = 0; i < 5; ++i) {
        auto t = scripted_trajectory("d" + std::to_string(i),
                                     {"U:go", "A:a|alpha_tool", "R:r", "A:b|beta_tool,delta_tool", "R:r", "A:done"}, kNames);
        expected_calls += t.call_count();
        trajs.push_back(t);
        pools.push_back(fixtures::name_pool(kNames));
    }
    DatasetConfig cfg;
    cfg.ablation = true;
    auto ds = render_dataset(trajs, pools, cfg);
    ASSERT_EQ(ds.samples.size(), expected_calls);
    ASSERT_EQ(ds.ablation.size(), expected_calls);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto full = parse_rendered_sample(ds.samples[i]);
        const auto bare = parse_rendered_sample(ds.ablation[i]);
        EXPECT_EQ(full.query, bare.query);
        EXPECT_EQ(full.label, bare.label);
        EXPECT_EQ(full.pool.members, bare.pool.members);
        EXPECT_TRUE(bare.history.empty());
        EXPECT_EQ(ds.samples[i]["group"], "General");
    }

    const auto path = (std::filesystem::temp_directory_path() / "hroute_ds.jsonl").string();
    auto stats = build_dataset(trajs, pools, cfg, path);
    EXPECT_EQ(stats.instances, expected_calls);
    EXPECT_EQ(ablation_path_for(path), (std::filesystem::temp_directory_path() / "hroute_ds.no_history.jsonl").string());
    EXPECT_TRUE(std::filesystem::exists(ablation_path_for(path)));
    std::filesystem::remove(path);
    std::filesystem::remove(ablation_path_for(path));
}

TEST(Dataset, EmptyInputEmptyOutput) {
    auto ds = render_dataset({}, {}, {});
    EXPECT_TRUE(ds.samples.empty());
    EXPECT_THROW(render_dataset({Trajectory{}}, {}, {}), Error);
}

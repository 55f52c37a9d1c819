#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/json_util.hpp"
#include "hroute/rng.hpp"
#include "hroute/trajectory.hpp"
#include "hroute/turns.hpp"

namespace hroute {

struct InstanceOrigin {
    std::string trajectory_id;
    std::size_t step = 0;  // index of the action turn
    bool operator==(const InstanceOrigin&) const = default;
};

/// (Q, H, pool, label) for one candidate call.
struct RoutingInstance {
    std::string query;
    std::vector<Turn> history;
    CandidatePool pool;
    std::string label;
    InstanceOrigin origin;
    std::string group = "all";
};

/// One instance per call, in temporal order. For the action at turn index
/// i the query is the observation at i-1 and the history is every turn
/// before that observation, so the first action has an empty history.
inline std::vector<RoutingInstance> extract_instances(const Trajectory& traj, const CandidatePool& pool) {
    std::vector<RoutingInstance> out;
    for (std::size_t i = 0; i < traj.turns.size(); ++i) {
        const auto* action = std::get_if<Action>(&traj.turns[i]);
        if (!action || action->calls.empty()) continue;
        if (i == 0) throw Error(Errc::ValidationError, traj.id + ": trajectory starts with an action");
        const auto* obs = std::get_if<Observation>(&traj.turns[i - 1]);
        if (!obs) throw Error(Errc::ValidationError, traj.id + ": action at " + std::to_string(i) + " not preceded by an observation");
        const std::string query = query_text(*obs);
        const std::vector<Turn> history(traj.turns.begin(), traj.turns.begin() + static_cast<std::ptrdiff_t>(i - 1));
        for (const auto& call : action->calls) {
            if (!pool.contains(call.name)) throw Error(Errc::PoolMissingLabel, traj.id + ": " + call.name);
            out.push_back({query, history, pool, call.name, {traj.id, i}, "all"});
        }
    }
    return out;
}

inline RoutingInstance strip_history(RoutingInstance instance) {
    instance.history.clear();
    return instance;
}

struct RenderedSample {
    std::string system;
    std::string user;
    std::vector<std::string> expected;
    std::string group = "all";
};

namespace prompts {

inline std::string router_system(CandidateKind kind) {
    const std::string noun = kind == CandidateKind::Agent ? "agent" : "tool";
    std::string p;
    p += kind == CandidateKind::Agent ? "You are an Agent Router.\n" : "You are a Tool Router.\n";
    p += "Your task is to analyze the meaning of a user query and select the most relevant " + noun + "s based on the " +
         noun + "s' descriptions and schemas.\n\n";
    p += "Guidelines:\n";
    p += "1. Consider both the " + noun + " descriptions and input schemas when judging relevance.\n";
    p += "2. Use the inputSchema to understand what parameters each " + noun + " accepts.\n";
    p += "3. Do not infer hidden capabilities or invent " + noun + "s.\n";
    p += "4. Return only one " + noun + " that is most relevant.\n";
    p += "5. Output strictly in the required format: [\"" + noun + "_name\"], no extra commentary.";
    return p;
}

inline constexpr std::string_view kHistoryIntro =
    "Below are examples of the user's past interactions, including queries and system responses:";

}  // namespace prompts

inline Json pool_block_json(const CandidatePool& pool) {
    Json arr = Json::array();
    for (const auto& name : pool.members) {
        const auto& spec = pool.spec(name);
        Json j{{"name", spec.name()}, {"description", spec.description()}};
        if (spec.is_agent()) j["tools"] = spec.agent().tools;
        j["inputSchema"] = spec.input_schema();
        arr.push_back(std::move(j));
    }
    return arr;
}

struct RouterPrompt {
    std::string system;
    std::string user;
};

/// The router exchange for (Q, H, pool), without the label.
inline RouterPrompt render_router_prompt(std::string_view query, const std::vector<Turn>& history,
                                         const CandidatePool& pool, CandidateKind kind) {
    const std::string noun = kind == CandidateKind::Agent ? "agent" : "tool";
    const std::string block = noun + "s";
    std::string u(prompts::kHistoryIntro);
    u += '\n';
    if (history.empty()) {
        u += "<history></history>\n";
    } else {
        u += "<history>\n" + render_transcript(history, kind) + "\n</history>\n";
    }
    u += "\nCurrent user query:\n<current query>\"" + std::string(query) + "\"</current query>\n\n";
    u += "Available " + block + ":\n<" + block + ">" + pool_block_json(pool).dump(2) + "</" + block + ">\n\n";
    u += "Task:\n<task>\n";
    u += "Analyze the current query in the context of the user's past queries and " + noun + " descriptions.\n";
    u += "Return the most relevant " + noun + " based on their descriptions and schemas.\n";
    u += "</task>\n\n";
    u += "Output requirements:\n###\n";
    u += "- First, think through your reasoning inside <think></think> tags\n";
    u += "- Then output only one " + noun + " name as a JSON array\n";
    u += "- Format:\n<think>\nYour reasoning about which " + noun + " to select...\n</think>\n\n";
    u += "[\"" + noun + "_name\"]\n###";
    return {prompts::router_system(kind), std::move(u)};
}

inline RenderedSample render_sample(const RoutingInstance& inst, CandidateKind kind) {
    auto prompt = render_router_prompt(inst.query, inst.history, inst.pool, kind);
    return {std::move(prompt.system), std::move(prompt.user), {inst.label}, inst.group};
}

inline std::string_view expected_key(CandidateKind kind) noexcept {
    return kind == CandidateKind::Agent ? "expected_agent" : "expected_tool";
}

inline Json to_json(const RenderedSample& s, CandidateKind kind) {
    Json j{{"system", s.system}, {"user", s.user}, {std::string(expected_key(kind)), s.expected}};
    if (s.group != "all") j["group"] = s.group;
    return j;
}

/// Reconstructs the instance behind a rendered sample: query and history
/// from their blocks, and a pool backed by the specs in the pool block.
inline RoutingInstance parse_rendered_sample(const Json& record, const std::string& where = "sample") {
    auto fail = [&](const std::string& why) { return Error(Errc::DatasetFormat, where + ": " + why); };
    if (!record.is_object() || !record.contains("user") || !record["user"].is_string()) throw fail("missing user text");
    CandidateKind kind;
    Json expected;
    if (record.contains("expected_agent")) {
        kind = CandidateKind::Agent;
        expected = record["expected_agent"];
    } else if (record.contains("expected_tool")) {
        kind = CandidateKind::Tool;
        expected = record["expected_tool"];
    } else {
        throw fail("missing expected_agent/expected_tool");
    }
    if (!expected.is_array() || expected.size() != 1 || !expected[0].is_string()) throw fail("expected must be a one-name array");
    const std::string user = record["user"].get<std::string>();
    const std::string block = kind == CandidateKind::Agent ? "agents" : "tools";

    RoutingInstance inst;
    inst.label = expected[0].get<std::string>();
    inst.group = record.value("group", std::string("all"));
    auto hist = extract_between(user, "<history>", "</history>");
    if (!hist) throw fail("missing <history> block");
    inst.history = parse_transcript(trim(*hist));
    const std::string_view rest = std::string_view(user).substr(static_cast<std::size_t>(hist->data() + hist->size() - user.data()));
    auto q = extract_between(rest, "<current query>", "</current query>");
    if (!q) throw fail("missing <current query> block");
    std::string_view qv = *q;
    if (qv.size() >= 2 && qv.front() == '"' && qv.back() == '"') qv = qv.substr(1, qv.size() - 2);
    inst.query = std::string(qv);

    const std::string_view tail = rest.substr(static_cast<std::size_t>(q->data() + q->size() - rest.data()));
    auto pool_text = extract_between(tail, "<" + block + ">", "</" + block + ">");
    if (!pool_text) throw fail("missing <" + block + "> block");
    Json pool_doc;
    try {
        pool_doc = Json::parse(*pool_text);
    } catch (const Json::parse_error& e) {
        throw fail(std::string("pool block: ") + e.what());
    }
    if (!pool_doc.is_array()) throw fail("pool block is not an array");
    auto catalog = std::make_shared<CandidateCatalog>();
    std::vector<std::string> members;
    for (const auto& entry : pool_doc) {
        try {
            auto spec = validate_spec(entry, kind, ValidationMode::Lenient);
            members.push_back(spec.name());
            if (!catalog->add(spec)) throw fail("duplicate pool member " + spec.name());
        } catch (const Error& e) {
            if (e.is(Errc::DatasetFormat)) throw;
            throw fail(std::string("pool entry: ") + e.what());
        }
    }
    try {
        inst.pool = CandidatePool::make(catalog, std::move(members));
    } catch (const Error& e) {
        throw fail(e.what());
    }
    if (!inst.pool.contains(inst.label)) throw fail("label " + inst.label + " not in pool");
    return inst;
}

inline CandidateKind sample_kind(const Json& record) {
    return record.contains("expected_agent") ? CandidateKind::Agent : CandidateKind::Tool;
}

/// Subset members plus distractors drawn from the catalog until the pool
/// reaches target_size (or the catalog runs out). Members come first in
/// subset order; distractor order is seeded.
inline CandidatePool pool_for(const Trajectory& traj, std::shared_ptr<const CandidateCatalog> catalog,
                              std::size_t target_size, std::uint64_t seed) {
    std::vector<std::string> members = traj.subset.members;
    std::vector<std::string> others;
    for (const auto& n : catalog->names())
        if (!traj.subset.contains(n)) others.push_back(n);
    Rng rng(derive_seed(seed, traj.id));
    rng.shuffle(others);
    for (std::size_t i = 0; i < others.size() && members.size() < target_size; ++i) members.push_back(others[i]);
    Rng order(derive_seed(seed, "order:" + traj.id));
    order.shuffle(members);
    return CandidatePool::make(std::move(catalog), std::move(members));
}

struct DatasetConfig {
    CandidateKind kind = CandidateKind::Tool;
    bool ablation = false;
    /// Group each instance by its label's first tag; otherwise "all".
    bool group_by_tag = true;
};

struct Dataset {
    std::vector<Json> samples;
    std::vector<Json> ablation;
};

struct DatasetStats {
    std::size_t trajectories = 0;
    std::size_t instances = 0;
    std::size_t ablation_instances = 0;
};

/// pools[i] serves trajectories[i].
inline Dataset render_dataset(const std::vector<Trajectory>& trajectories, const std::vector<CandidatePool>& pools,
                              const DatasetConfig& cfg) {
    if (pools.size() != trajectories.size()) throw Error(Errc::BadConfig, "one pool per trajectory required");
    Dataset ds;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        for (auto& inst : extract_instances(trajectories[i], pools[i])) {
            if (cfg.group_by_tag) {
                const auto& tags = inst.pool.spec(inst.label).tags();
                if (!tags.empty()) inst.group = tags.front();
            }
            ds.samples.push_back(to_json(render_sample(inst, cfg.kind), cfg.kind));
            if (cfg.ablation) ds.ablation.push_back(to_json(render_sample(strip_history(inst), cfg.kind), cfg.kind));
        }
    }
    return ds;
}

inline std::string ablation_path_for(const std::string& path) {
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ".no_history";
    return path.substr(0, dot) + ".no_history" + path.substr(dot);
}

/// Writes the dataset (and its history-stripped twin when ablation is on,
/// next to it with a ".no_history" infix).
inline DatasetStats build_dataset(const std::vector<Trajectory>& trajectories, const std::vector<CandidatePool>& pools,
                                  const DatasetConfig& cfg, const std::string& path) {
    const Dataset ds = render_dataset(trajectories, pools, cfg);
    write_records(path, ds.samples);
    if (cfg.ablation) write_records(ablation_path_for(path), ds.ablation);
    return {trajectories.size(), ds.samples.size(), ds.ablation.size()};
}

}  // namespace hroute

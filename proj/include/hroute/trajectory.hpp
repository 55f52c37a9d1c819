#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/json_util.hpp"
#include "hroute/rng.hpp"
#include "hroute/sampler.hpp"
#include "hroute/turns.hpp"

namespace hroute {

struct PlanStep {
    std::string goal;
    std::string candidate;
    bool operator==(const PlanStep&) const = default;
};

struct TaskPlan {
    std::string task_text;
    std::vector<PlanStep> steps;
    bool operator==(const TaskPlan&) const = default;
};

struct Trajectory {
    std::string id;
    CandidateSubset subset;
    TaskPlan plan;
    std::vector<Turn> turns;

    std::size_t call_count() const {
        std::size_t n = 0;
        for (const auto& t : turns)
            if (const auto* a = std::get_if<Action>(&t)) n += a->calls.size();
        return n;
    }
    std::size_t actions_with_calls() const {
        std::size_t n = 0;
        for (const auto& t : turns)
            if (const auto* a = std::get_if<Action>(&t)) n += !a->calls.empty();
        return n;
    }
    bool operator==(const Trajectory&) const = default;
};

// ---------------------------------------------------------------------------
// Argument conformance

namespace detail {

inline bool json_matches_type(const Json& v, std::string_view type) {
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    if (type == "array") return v.is_array();
    if (type == "object") return v.is_object();
    if (type == "null") return v.is_null();
    return true;
}

}  // namespace detail

/// Required fields present and declared primitive types respected. Returns
/// a description of the first violation, if any.
inline std::optional<std::string> check_arguments(const Json& schema, const Json& args) {
    if (!args.is_object()) return "arguments must be an object";
    const Json props = schema.value("properties", Json::object());
    for (const auto& r : schema.value("required", Json::array())) {
        if (r.is_string() && !args.contains(r.get<std::string>())) return "missing required argument '" + r.get<std::string>() + "'";
    }
    for (const auto& [key, value] : args.items()) {
        auto p = props.find(key);
        if (p == props.end() || !p->is_object()) continue;
        auto t = p->find("type");
        if (t == p->end()) continue;
        if (t->is_string() && !detail::json_matches_type(value, t->get<std::string>()))
            return "argument '" + key + "' is not of type " + t->get<std::string>();
        if (t->is_array()) {
            bool ok = false;
            for (const auto& alt : *t) ok = ok || (alt.is_string() && detail::json_matches_type(value, alt.get<std::string>()));
            if (!ok) return "argument '" + key + "' matches none of " + dump_line(*t);
        }
    }
    return std::nullopt;
}

/// Deterministic, schema-conforming arguments: every required property, or
/// the first property when nothing is required.
inline Json example_arguments(const Json& schema, std::uint64_t salt = 0) {
    Json args = Json::object();
    const Json props = schema.value("properties", Json::object());
    std::vector<std::string> keys;
    for (const auto& r : schema.value("required", Json::array()))
        if (r.is_string()) keys.push_back(r.get<std::string>());
    if (keys.empty() && !props.empty()) keys.push_back(props.begin().key());
    for (const auto& key : keys) {
        const Json p = props.value(key, Json::object());
        std::string type = "string";
        if (auto t = p.find("type"); t != p.end()) {
            if (t->is_string()) type = t->get<std::string>();
            else if (t->is_array() && !t->empty() && t->front().is_string()) type = t->front().get<std::string>();
        }
        if (auto e = p.find("enum"); e != p.end() && e->is_array() && !e->empty()) {
            args[key] = (*e)[salt % e->size()];
        } else if (auto d = p.find("default"); d != p.end() && detail::json_matches_type(*d, type)) {
            args[key] = *d;
        } else if (type == "integer") {
            args[key] = static_cast<int>(1 + salt % 10);
        } else if (type == "number") {
            args[key] = 0.5 + static_cast<double>(salt % 10);
        } else if (type == "boolean") {
            args[key] = (salt & 1) == 0;
        } else if (type == "array") {
            args[key] = Json::array();
        } else if (type == "object") {
            args[key] = Json::object();
        } else if (type == "null") {
            args[key] = nullptr;
        } else {
            args[key] = "sample_" + key;
        }
    }
    return args;
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { Alternation, OutOfSubset, SchemaViolation, Length, EmptyQuery, PlanMismatch };

constexpr std::string_view to_string(ViolationKind k) noexcept {
    switch (k) {
        case ViolationKind::Alternation: return "alternation";
        case ViolationKind::OutOfSubset: return "out_of_subset";
        case ViolationKind::SchemaViolation: return "schema";
        case ViolationKind::Length: return "length";
        case ViolationKind::EmptyQuery: return "empty_query";
        case ViolationKind::PlanMismatch: return "plan";
    }
    return "?";
}

struct Violation {
    ViolationKind kind;
    std::size_t turn = 0;
    std::string detail;
};

struct TrajectoryReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
    bool has(ViolationKind k) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == k; });
    }
};

/// Alternation (observation first), subset membership of every call,
/// argument conformance, and minimum length. Pure.
inline TrajectoryReport validate_trajectory(const Trajectory& traj, const CandidateCatalog& specs) {
    TrajectoryReport report;
    const auto& turns = traj.turns;
    if (turns.size() < 2) report.violations.push_back({ViolationKind::Length, turns.size(), "fewer than 2 turns"});
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const bool want_observation = i % 2 == 0;
        if (is_observation(turns[i]) != want_observation) {
            report.violations.push_back({ViolationKind::Alternation, i,
                                         want_observation ? "expected an observation" : "expected an action"});
        }
        if (const auto* o = std::get_if<Observation>(&turns[i])) {
            if (query_text(*o).empty()) report.violations.push_back({ViolationKind::EmptyQuery, i, "empty observation"});
        }
        if (const auto* a = std::get_if<Action>(&turns[i])) {
            for (const auto& c : a->calls) {
                if (!traj.subset.contains(c.name)) {
                    report.violations.push_back({ViolationKind::OutOfSubset, i, c.name});
                    continue;
                }
                const auto* spec = specs.find(c.name);
                if (!spec) {
                    report.violations.push_back({ViolationKind::OutOfSubset, i, "unresolved " + c.name});
                    continue;
                }
                if (auto bad = check_arguments(spec->input_schema(), c.arguments))
                    report.violations.push_back({ViolationKind::SchemaViolation, i, c.name + ": " + *bad});
            }
        }
    }
    for (const auto& step : traj.plan.steps)
        if (!traj.subset.contains(step.candidate))
            report.violations.push_back({ViolationKind::PlanMismatch, 0, "plan step targets " + step.candidate});
    return report;
}

// ---------------------------------------------------------------------------
// Prompts

namespace prompts {

inline constexpr std::string_view kTaskDesigner = "# Role: Task Designer";
inline constexpr std::string_view kUserSimulator = "# Role: User Simulator";
inline constexpr std::string_view kAssistantSimulator = "# Role: Assistant Simulator";
inline constexpr std::string_view kToolSimulator = "# Role: Tool Simulator";

inline Json candidate_brief(const CandidateSpec& spec) {
    Json j{{"name", spec.name()}, {"description", spec.description()}};
    if (spec.is_agent()) j["tools"] = spec.agent().tools;
    j["inputSchema"] = spec.input_schema();
    return j;
}

inline std::string task_designer(const std::vector<const CandidateSpec*>& members) {
    Json arr = Json::array();
    for (const auto* m : members) arr.push_back(candidate_brief(*m));
    std::string p(kTaskDesigner);
    p += "\n\nYou design realistic multi-step user tasks for an assistant that can call the candidates below. The "
         "candidates were sampled together because they are related in function or workflow.\n\n";
    p += "## Candidates\n<candidates>\n" + dump_pretty(arr) + "\n</candidates>\n\n";
    p += "## Instructions\n";
    p += "- Write one task a real user could ask for, solvable only by using several of these candidates.\n";
    p += "- Give a coarse execution plan: an ordered list of steps, each naming exactly one candidate from the list.\n";
    p += "- Later steps may depend on results of earlier ones.\n";
    p += "- Use only candidate names that appear above.\n\n";
    p += "## Output\nReturn ONLY valid JSON: {\"task\": \"...\", \"steps\": [{\"goal\": \"...\", \"candidate\": "
         "\"candidate_name\"}]}\n";
    return p;
}

inline std::string user_simulator(const TaskPlan& plan, const std::vector<Turn>& transcript, std::string_view phase,
                                  const PlanStep* next, bool last_failed) {
    Json state{{"phase", phase}, {"task", plan.task_text}, {"last_result_failed", last_failed}};
    state["next_goal"] = next ? Json(next->goal) : Json(nullptr);
    std::string p(kUserSimulator);
    p += "\n\nYou play the user in a conversation with an assistant. Stay in character, be concise, and write only the "
         "user's next message.\n\n";
    p += "## Conversation so far\n<transcript>\n" + render_transcript(transcript) + "\n</transcript>\n\n";
    p += "## State\n<state>" + dump_line(state) + "</state>\n\n";
    p += "## Instructions\n";
    p += "- phase \"opening\": state the task and ask for the first goal.\n";
    p += "- phase \"follow_up\": react to the assistant's last message and ask for next_goal; if last_result_failed is "
         "true, ask the assistant to try again.\n";
    p += "Return only the message text.\n";
    return p;
}

inline std::string assistant_simulator(const TaskPlan& plan, const std::vector<Turn>& transcript,
                                       const std::vector<PlanStep>& remaining, bool last_failed, int max_calls,
                                       const std::vector<const CandidateSpec*>& members) {
    Json cands = Json::array();
    for (const auto* m : members) cands.push_back(candidate_brief(*m));
    Json rem = Json::array();
    for (const auto& s : remaining) rem.push_back(Json{{"goal", s.goal}, {"candidate", s.candidate}});
    Json state{{"task", plan.task_text}, {"remaining_steps", rem}, {"last_result_failed", last_failed}, {"max_calls", max_calls}};
    std::string p(kAssistantSimulator);
    p += "\n\nYou play an assistant that completes the user's task by calling candidates. Follow the plan, react to "
         "results, and finish with a short final answer once every step is done.\n\n";
    p += "## Available candidates\n<candidates>\n" + dump_pretty(cands) + "\n</candidates>\n\n";
    p += "## Conversation so far\n<transcript>\n" + render_transcript(transcript) + "\n</transcript>\n\n";
    p += "## State\n<state>" + dump_line(state) + "</state>\n\n";
    p += "## Instructions\n";
    p += "- Call at most max_calls candidates in this turn, with arguments that satisfy their inputSchema.\n";
    p += "- If last_result_failed is true, explain the failure to the user instead of calling anything.\n";
    p += "- If remaining_steps is empty, give the final answer with no calls.\n\n";
    p += "## Output\nReturn ONLY valid JSON: {\"content\": \"<think>...</think> message\", \"calls\": [{\"name\": "
         "\"candidate_name\", \"arguments\": {}}]}\n";
    return p;
}

inline std::string tool_simulator(const CandidateSpec& spec, const Json& arguments, bool simulate_failure) {
    std::string p(kToolSimulator);
    p += "\n\nYou simulate the execution of a tool or agent. Produce the raw result it would return for the call "
         "below, as plain text or JSON, without commentary.\n\n";
    p += "## Candidate\n" + dump_pretty(candidate_brief(spec)) + "\n\n";
    p += "## Call\n<call>" +
         dump_line(Json{{"name", spec.name()}, {"arguments", arguments}, {"simulate_failure", simulate_failure}}) +
         "</call>\n\n";
    p += simulate_failure ? "Simulate a realistic failure (error message, no useful data).\n"
                          : "Simulate a plausible successful result consistent with the arguments.\n";
    return p;
}

}  // namespace prompts

struct SynthesisOptions {
    double temperature = 0.7;
    std::string model_id = "mock";
    int max_retries = 2;
    std::uint64_t seed = 0;
};

namespace detail {

inline ChatRequest user_request(std::string prompt, const SynthesisOptions& o, std::uint64_t seed) {
    ChatRequest req;
    req.messages.push_back({Role::User, std::move(prompt)});
    req.temperature = o.temperature;
    req.model_id = o.model_id;
    req.seed = seed;
    return req;
}

inline std::vector<const CandidateSpec*> resolve_members(const CandidateSubset& subset, const CandidateCatalog& specs) {
    std::vector<const CandidateSpec*> out;
    for (const auto& m : subset.members) out.push_back(&specs.at(m));
    return out;
}

}  // namespace detail

inline TaskPlan parse_task_plan(std::string_view reply, const CandidateSubset& subset) {
    Json doc;
    try {
        doc = Json::parse(strip_code_fence(reply));
    } catch (const Json::parse_error& e) {
        throw Error(Errc::NotParseable, e.what());
    }
    if (!doc.is_object() || !doc.contains("task") || !doc["task"].is_string() || !doc.contains("steps") || !doc["steps"].is_array())
        throw Error(Errc::NotParseable, "expected {task, steps}");
    TaskPlan plan{doc["task"].get<std::string>(), {}};
    for (const auto& s : doc["steps"]) {
        if (!s.is_object() || !s.contains("candidate") || !s["candidate"].is_string())
            throw Error(Errc::NotParseable, "step without candidate");
        PlanStep step{s.value("goal", std::string()), s["candidate"].get<std::string>()};
        if (!subset.contains(step.candidate)) throw Error(Errc::OutOfSubsetReference, step.candidate);
        plan.steps.push_back(std::move(step));
    }
    if (plan.steps.empty()) throw Error(Errc::NotParseable, "plan has no steps");
    if (trim(plan.task_text).empty()) throw Error(Errc::NotParseable, "empty task");
    return plan;
}

/// Asks the model for a task and coarse plan over the subset; retries on
/// unparseable replies or out-of-subset references.
inline TaskPlan propose_task(const CandidateSubset& subset, const CandidateCatalog& specs, const SynthesisOptions& opts,
                             Gateway& gateway) {
    if (subset.members.empty()) throw Error(Errc::BadConfig, "empty subset");
    const auto members = detail::resolve_members(subset, specs);
    const std::string prompt = prompts::task_designer(members);
    std::optional<Error> last;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        const auto reply = gateway.chat(detail::user_request(prompt, opts, derive_seed(derive_seed(opts.seed, "task"), static_cast<std::uint64_t>(attempt))));
        try {
            return parse_task_plan(reply, subset);
        } catch (const Error& e) {
            last = e;
        }
    }
    throw Error(Errc::RetriesExhausted, last ? last->detail() : "", last ? std::optional<Errc>(last->code()) : std::nullopt);
}

enum class DiscardReason { AlternationBroken, OutOfSubsetCall, SchemaViolatingArguments, OverLength, Unparseable };

constexpr std::string_view to_string(DiscardReason r) noexcept {
    switch (r) {
        case DiscardReason::AlternationBroken: return "alternation broken";
        case DiscardReason::OutOfSubsetCall: return "out-of-subset call";
        case DiscardReason::SchemaViolatingArguments: return "schema-violating arguments";
        case DiscardReason::OverLength: return "over length";
        case DiscardReason::Unparseable: return "unparseable response";
    }
    return "?";
}

class DiscardedTrajectory : public Error {
  public:
    DiscardedTrajectory(DiscardReason reason, const std::string& detail)
        : Error(Errc::Discarded, std::string(to_string(reason)) + (detail.empty() ? "" : ": " + detail)), reason_(reason) {}
    DiscardReason reason() const noexcept { return reason_; }

  private:
    DiscardReason reason_;
};

struct SimulationConfig {
    /// Upper bound on assistant actions per trajectory.
    int max_turns = 12;
    /// Probability that a planned call's simulated result is a failure.
    double error_injection = 0.1;
    int max_calls_per_action = 2;
    SynthesisOptions llm;
};

inline Action parse_action(std::string_view reply) {
    Json doc;
    try {
        doc = Json::parse(strip_code_fence(reply));
    } catch (const Json::parse_error& e) {
        throw DiscardedTrajectory(DiscardReason::Unparseable, e.what());
    }
    if (!doc.is_object()) throw DiscardedTrajectory(DiscardReason::Unparseable, "action is not an object");
    Action a;
    if (auto c = doc.find("content"); c != doc.end() && c->is_string()) a.content = c->get<std::string>();
    if (auto calls = doc.find("calls"); calls != doc.end()) {
        if (!calls->is_array()) throw DiscardedTrajectory(DiscardReason::Unparseable, "calls is not an array");
        for (const auto& c : *calls) {
            if (!c.is_object() || !c.contains("name") || !c["name"].is_string())
                throw DiscardedTrajectory(DiscardReason::Unparseable, "call without name");
            a.calls.push_back({c["name"].get<std::string>(), c.value("arguments", Json::object()), {}});
        }
    }
    return a;
}

/// Role-based, environment-free simulation: the user, the assistant and
/// every candidate result are played by the chat backend. Throws
/// DiscardedTrajectory instead of repairing an invalid sample.
inline Trajectory simulate_trajectory(const TaskPlan& plan, const CandidateSubset& subset, const CandidateCatalog& specs,
                                      const SimulationConfig& cfg, Gateway& gateway, std::string id = {}) {
    if (plan.steps.empty()) throw Error(Errc::BadConfig, "plan without steps");
    for (const auto& s : plan.steps)
        if (!subset.contains(s.candidate)) throw Error(Errc::OutOfSubsetReference, s.candidate);
    const auto members = detail::resolve_members(subset, specs);
    Trajectory traj{std::move(id), subset, plan, {}};
    Rng rng(derive_seed(cfg.llm.seed, "simulate"));
    std::uint64_t request_no = 0;
    auto ask = [&](std::string prompt) {
        return gateway.chat(detail::user_request(std::move(prompt), cfg.llm, derive_seed(cfg.llm.seed, request_no++)));
    };

    std::size_t next_step = 0;
    std::set<std::size_t> errored_steps;
    bool last_failed = false;
    const auto step_count = plan.steps.size();

    const std::string opening = ask(prompts::user_simulator(plan, traj.turns, "opening", &plan.steps.front(), false));
    traj.turns.push_back(Observation::user(std::string(trim(opening))));

    int actions = 0;
    while (true) {
        if (actions >= cfg.max_turns)
            throw DiscardedTrajectory(DiscardReason::OverLength, "no final answer within " + std::to_string(cfg.max_turns) + " actions");
        const std::vector<PlanStep> remaining(plan.steps.begin() + static_cast<std::ptrdiff_t>(next_step), plan.steps.end());
        Action action = parse_action(
            ask(prompts::assistant_simulator(plan, traj.turns, remaining, last_failed, cfg.max_calls_per_action, members)));
        ++actions;
        if (static_cast<int>(action.calls.size()) > cfg.max_calls_per_action)
            throw DiscardedTrajectory(DiscardReason::OverLength, std::to_string(action.calls.size()) + " calls in one action");
        for (const auto& c : action.calls) {
            if (!subset.contains(c.name)) throw DiscardedTrajectory(DiscardReason::OutOfSubsetCall, c.name);
            if (auto bad = check_arguments(specs.at(c.name).input_schema(), c.arguments))
                throw DiscardedTrajectory(DiscardReason::SchemaViolatingArguments, c.name + ": " + *bad);
        }

        if (action.calls.empty()) {
            traj.turns.push_back(std::move(action));
            if (next_step >= step_count) break;
            const std::string follow =
                ask(prompts::user_simulator(plan, traj.turns, "follow_up", &plan.steps[next_step], last_failed));
            traj.turns.push_back(Observation::user(std::string(trim(follow))));
            last_failed = false;
            continue;
        }

        std::size_t cursor = next_step;
        bool failed = false;
        std::vector<std::string> results;
        for (auto& call : action.calls) {
            const bool planned = !failed && cursor < step_count && call.name == plan.steps[cursor].candidate;
            // Leave room for acknowledgement, retry, the remaining steps and the final answer.
            const bool room = actions + static_cast<int>(step_count - cursor) + 2 <= cfg.max_turns;
            const bool inject = planned && room && !errored_steps.count(cursor) && rng.bernoulli(cfg.error_injection);
            call.simulated_result = std::string(trim(ask(prompts::tool_simulator(specs.at(call.name), call.arguments, inject))));
            results.push_back(call.simulated_result);
            if (inject) {
                errored_steps.insert(cursor);
                failed = true;
            } else if (planned) {
                ++cursor;
            }
        }
        next_step = cursor;
        last_failed = failed;
        traj.turns.push_back(std::move(action));
        traj.turns.push_back(Observation::tool(std::move(results)));
    }

    const auto report = validate_trajectory(traj, specs);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        DiscardReason r = DiscardReason::AlternationBroken;
        if (v.kind == ViolationKind::OutOfSubset) r = DiscardReason::OutOfSubsetCall;
        if (v.kind == ViolationKind::SchemaViolation) r = DiscardReason::SchemaViolatingArguments;
        if (v.kind == ViolationKind::Length) r = DiscardReason::OverLength;
        throw DiscardedTrajectory(r, v.detail);
    }
    return traj;
}

inline Json to_json(const TaskPlan& p) {
    Json steps = Json::array();
    for (const auto& s : p.steps) steps.push_back(Json{{"goal", s.goal}, {"candidate", s.candidate}});
    return Json{{"task", p.task_text}, {"steps", steps}};
}

inline TaskPlan plan_from_json(const Json& j) {
    TaskPlan p{j.at("task").get<std::string>(), {}};
    for (const auto& s : j.at("steps")) p.steps.push_back({s.value("goal", std::string()), s.at("candidate").get<std::string>()});
    return p;
}

inline Json to_json(const Trajectory& t) {
    return Json{{"id", t.id}, {"subset", to_json(t.subset)}, {"plan", to_json(t.plan)}, {"turns", turns_to_json(t.turns)}};
}

inline Trajectory trajectory_from_json(const Json& j) {
    return {j.value("id", std::string()), subset_from_json(j.at("subset")), plan_from_json(j.at("plan")), turns_from_json(j.at("turns"))};
}

inline void save_trajectories(const std::vector<Trajectory>& trajs, const std::string& path) {
    std::vector<Json> lines;
    for (const auto& t : trajs) lines.push_back(to_json(t));
    write_records(path, lines);
}

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::vector<Trajectory> out;
    for (const auto& rec : read_records(path)) {
        try {
            out.push_back(trajectory_from_json(rec.value));
        } catch (const Json::exception& e) {
            throw Error(Errc::ParseError, path + ":" + std::to_string(rec.line) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace hroute

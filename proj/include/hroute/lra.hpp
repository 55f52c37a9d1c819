#pragma once

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "httplib.h"

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/json_util.hpp"
#include "hroute/router.hpp"
#include "hroute/turns.hpp"

namespace hroute {

// ---------------------------------------------------------------------------
// Executors

struct ExecResult {
    bool ok = true;
    std::string output;
};

class Executor {
  public:
    virtual ~Executor() = default;
    virtual ExecResult execute(const std::string& name, const Json& arguments) = 0;
    virtual std::string describe() const = 0;
};

inline std::uint64_t argument_hash(const Json& arguments) { return fnv1a(dump_line(arguments)); }

/// Results looked up by (name, argument hash). Unknown keys get a
/// deterministic placeholder unless the table is strict.
class MockTableExecutor final : public Executor {
  public:
    explicit MockTableExecutor(bool strict = false) : strict_(strict) {}

    void set(const std::string& name, const Json& arguments, ExecResult result) {
        table_[{name, argument_hash(arguments)}] = std::move(result);
    }
    ExecResult execute(const std::string& name, const Json& arguments) override {
        const auto h = argument_hash(arguments);
        if (auto it = table_.find({name, h}); it != table_.end()) return it->second;
        if (strict_) return {false, "no scripted result for " + name};
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
        return {true, dump_line(Json{{"candidate", name}, {"status", "ok"}, {"result_id", hex}})};
    }
    std::string describe() const override { return "mock"; }

  private:
    bool strict_;
    std::map<std::pair<std::string, std::uint64_t>, ExecResult> table_;
};

class ScriptedExecutor final : public Executor {
  public:
    using Script = std::function<ExecResult(const std::string&, const Json&)>;
    explicit ScriptedExecutor(Script s) : script_(std::move(s)) {}
    ExecResult execute(const std::string& name, const Json& arguments) override { return script_(name, arguments); }
    std::string describe() const override { return "scripted"; }

  private:
    Script script_;
};

/// Runs a shell command with the call as JSON on stdin; stdout is the
/// result, a non-zero exit status marks failure.
class CommandExecutor final : public Executor {
  public:
    explicit CommandExecutor(std::string command) : command_(std::move(command)) {}

    ExecResult execute(const std::string& name, const Json& arguments) override {
        const auto dir = std::filesystem::temp_directory_path();
        const auto file = dir / ("hroute-call-" + std::to_string(fnv1a(name + dump_line(arguments)) ^ counter_++) + ".json");
        write_text_file(file.string(), dump_line(Json{{"name", name}, {"arguments", arguments}}));
        const std::string cmd = command_ + " < '" + file.string() + "'";
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) {
            std::filesystem::remove(file);
            return {false, "cannot start: " + command_};
        }
        std::string out;
        char buf[4096];
        while (auto n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
        const int status = pclose(pipe);
        std::filesystem::remove(file);
        return {status == 0, std::string(trim(out))};
    }
    std::string describe() const override { return "command:" + command_; }

  private:
    std::string command_;
    std::atomic<std::uint64_t> counter_{0};
};

/// POSTs {"name", "arguments"} to an HTTP endpoint; 2xx bodies are results.
class HttpExecutor final : public Executor {
  public:
    HttpExecutor(std::string base_url, std::string path) : base_(std::move(base_url)), path_(std::move(path)) {}

    ExecResult execute(const std::string& name, const Json& arguments) override {
        httplib::Client client(base_);
        client.set_read_timeout(60, 0);
        auto res = client.Post(path_, dump_line(Json{{"name", name}, {"arguments", arguments}}), "application/json");
        if (!res) return {false, "http error: " + httplib::to_string(res.error())};
        return {res->status >= 200 && res->status < 300, res->body};
    }
    std::string describe() const override { return "http:" + base_ + path_; }

  private:
    std::string base_;
    std::string path_;
};

/// Candidate name -> executor, with an optional default for unlisted names.
struct ExecutorBinding {
    std::map<std::string, std::shared_ptr<Executor>> by_name;
    std::shared_ptr<Executor> fallback;

    Executor* find(const std::string& name) const {
        if (auto it = by_name.find(name); it != by_name.end()) return it->second.get();
        return fallback.get();
    }
    bool covers(const CandidatePool& pool) const {
        return std::all_of(pool.members.begin(), pool.members.end(), [&](const auto& m) { return find(m) != nullptr; });
    }
};

/// Descriptor file: {"default": D, "candidates": {name: D}} where D is
/// {"type": "mock"} | {"type": "command", "command": "..."} |
/// {"type": "http", "url": "http://host:port", "path": "/call"}.
inline std::shared_ptr<Executor> executor_from_json(const Json& d) {
    const std::string type = d.value("type", std::string("mock"));
    if (type == "mock") return std::make_shared<MockTableExecutor>();
    if (type == "command") return std::make_shared<CommandExecutor>(d.at("command").get<std::string>());
    if (type == "http") return std::make_shared<HttpExecutor>(d.at("url").get<std::string>(), d.value("path", std::string("/call")));
    throw Error(Errc::BadConfig, "unknown executor type " + type);
}

inline ExecutorBinding binding_from_json(const Json& doc) {
    ExecutorBinding b;
    try {
        if (doc.contains("default")) b.fallback = executor_from_json(doc["default"]);
        const Json candidates = doc.value("candidates", Json::object());
        for (const auto& [name, d] : candidates.items()) b.by_name[name] = executor_from_json(d);
    } catch (const Json::exception& e) {
        throw Error(Errc::BadConfig, std::string("executor descriptor: ") + e.what());
    }
    return b;
}

// ---------------------------------------------------------------------------
// Reasoner protocol

namespace prompts {

inline constexpr std::string_view kLightRoutingAgent = "# Role: Light Routing Agent";
inline constexpr std::string_view kRouteTool = "route_candidate";
inline constexpr std::string_view kExecuteTool = "execute_candidate";

inline std::string lra_tool_specs() {
    const Json route{{"name", kRouteTool},
                     {"description", "Ask the router for the single candidate best suited to the current need. The "
                                     "router sees the whole dialogue; the reply names the candidate and its inputSchema."},
                     {"inputSchema",
                      {{"type", "object"},
                       {"properties", {{"need", {{"type", "string"}, {"description", "What must be done next, in plain words"}}}}},
                       {"required", {"need"}}}}};
    const Json execute{{"name", kExecuteTool},
                       {"description", "Execute the candidate returned by the most recent route_candidate call with the "
                                       "given arguments."},
                       {"inputSchema",
                        {{"type", "object"},
                         {"properties", {{"arguments", {{"type", "object"}, {"description", "Arguments matching the routed candidate's inputSchema"}}}}},
                         {"required", {"arguments"}}}}};
    return "<tool_spec>" + dump_line(route) + "</tool_spec>\n<tool_spec>" + dump_line(execute) + "</tool_spec>";
}

inline std::string lra_system() {
    std::string p(kLightRoutingAgent);
    p += "\n\nYou solve the user's task step by step. You cannot see the catalog of available tools and agents. To get "
         "something done, first call route_candidate with the current need, then call execute_candidate with arguments "
         "for the routed candidate. When the task is complete, give the final answer.\n\n";
    p += "## Tools\n" + lra_tool_specs() + "\n\n";
    p += "## Output\nReturn ONLY valid JSON, either {\"tool\": \"route_candidate\", \"arguments\": {\"need\": \"...\"}}, "
         "{\"tool\": \"execute_candidate\", \"arguments\": {\"arguments\": {}}} or {\"final_answer\": \"...\"}.";
    return p;
}

}  // namespace prompts

struct DialogueEntry {
    enum class Kind { Reasoner, RouteResult, ExecuteResult, Error } kind;
    std::string text;
};

inline std::string_view dialogue_label(DialogueEntry::Kind k) noexcept {
    switch (k) {
        case DialogueEntry::Kind::Reasoner: return "Reasoner";
        case DialogueEntry::Kind::RouteResult: return "Result[route_candidate]";
        case DialogueEntry::Kind::ExecuteResult: return "Result[execute_candidate]";
        case DialogueEntry::Kind::Error: return "Result[error]";
    }
    return "?";
}

inline std::string render_dialogue(const std::vector<DialogueEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        if (!out.empty()) out += '\n';
        out += std::string(dialogue_label(e.kind)) + ": " + e.text;
    }
    return out;
}

inline ChatRequest render_reasoner_prompt(std::string_view task, const std::vector<DialogueEntry>& dialogue,
                                          const std::string& model_id, double temperature, std::uint64_t seed) {
    ChatRequest req;
    req.messages.push_back({Role::System, prompts::lra_system()});
    std::string u = "<task>" + std::string(task) + "</task>\n\n<dialogue>\n" + render_dialogue(dialogue) + "\n</dialogue>";
    req.messages.push_back({Role::User, std::move(u)});
    req.model_id = model_id;
    req.temperature = temperature;
    req.seed = seed;
    return req;
}

struct ReasonerMove {
    enum class Kind { Route, Execute, Final, Invalid } kind = Kind::Invalid;
    std::string need;
    Json arguments = Json::object();
    std::string answer;
    std::string error;
};

inline ReasonerMove parse_reasoner_move(std::string_view reply) {
    ReasonerMove m;
    Json doc = Json::parse(strip_code_fence(reply), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        m.error = "reply is not a JSON object";
        return m;
    }
    if (auto f = doc.find("final_answer"); f != doc.end()) {
        m.kind = ReasonerMove::Kind::Final;
        m.answer = f->is_string() ? f->get<std::string>() : dump_line(*f);
        return m;
    }
    const std::string tool = doc.value("tool", std::string());
    const Json args = doc.value("arguments", Json::object());
    if (tool == prompts::kRouteTool) {
        m.kind = ReasonerMove::Kind::Route;
        m.need = args.value("need", std::string());
        if (m.need.empty()) {
            m.kind = ReasonerMove::Kind::Invalid;
            m.error = "route_candidate without need";
        }
    } else if (tool == prompts::kExecuteTool) {
        m.kind = ReasonerMove::Kind::Execute;
        m.arguments = args.value("arguments", Json::object());
    } else {
        m.error = "unknown tool '" + tool + "'";
    }
    return m;
}

// ---------------------------------------------------------------------------
// Episodes

struct EpisodeStep {
    std::vector<std::string> reasoner_texts;
    std::optional<std::string> need;
    std::optional<RouterDecision> decision;
    std::optional<std::string> executed;
    Json arguments;
    std::optional<ExecResult> result;
    std::optional<Error> error;
};

enum class EpisodeOutcome { Finished, BudgetExhausted, Error };

constexpr std::string_view to_string(EpisodeOutcome o) noexcept {
    switch (o) {
        case EpisodeOutcome::Finished: return "finished";
        case EpisodeOutcome::BudgetExhausted: return "budget_exhausted";
        case EpisodeOutcome::Error: return "error";
    }
    return "?";
}

struct ContextAudit {
    std::size_t prompts = 0;
    std::size_t max_prompt_chars = 0;
    /// Prompt size minus the dialogue block; constant per task when the
    /// prompt does not depend on the pool.
    std::size_t max_static_chars = 0;
    std::size_t min_tool_specs = 0;
    std::size_t max_tool_specs = 0;
    /// Pool members whose description appeared in any reasoner prompt.
    std::size_t catalog_entries = 0;
    std::vector<std::size_t> prompt_chars;
};

struct EpisodeLog {
    std::string task;
    std::vector<EpisodeStep> steps;
    EpisodeOutcome outcome = EpisodeOutcome::Error;
    std::optional<std::string> final_answer;
    std::optional<std::string> error;
    ContextAudit context_audit;
};

using Reasoner = std::function<std::string(const ChatRequest&)>;

inline Reasoner gateway_reasoner(Gateway& gateway) {
    return [&gateway](const ChatRequest& req) { return gateway.chat(req); };
}

struct EpisodeConfig {
    std::size_t budget = 8;
    /// Reasoner replies allowed inside one step before it is closed.
    std::size_t max_moves_per_step = 4;
    std::string reasoner_model = "mock";
    double temperature = 0.0;
    std::uint64_t seed = 0;
    /// Consulted by an oracle router: the label for a given need.
    std::function<std::optional<std::string>(const std::string&)> oracle;
};

namespace detail {

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

}  // namespace detail

/// The reasoner sees two tools and never the pool. Routing goes through
/// `router` with the episode transcript as history; execution always
/// targets the most recent decision of the current step.
inline EpisodeLog run_episode(const std::string& task, const CandidatePool& pool, const RouterConfig& router,
                              const ExecutorBinding& executors, const Reasoner& reasoner, Gateway& gateway,
                              const EpisodeConfig& cfg = {}) {
    if (cfg.budget < 1) throw Error(Errc::BadConfig, "episode budget must be >= 1");
    EpisodeLog log;
    log.task = task;
    std::vector<DialogueEntry> dialogue;
    std::vector<Turn> transcript{Observation::user(task)};
    std::vector<bool> seen_description(pool.size(), false);
    auto& audit = log.context_audit;
    std::uint64_t call_no = 0;

    auto ask = [&]() {
        ChatRequest req = render_reasoner_prompt(task, dialogue, cfg.reasoner_model, cfg.temperature,
                                                 derive_seed(cfg.seed, call_no++));
        std::size_t chars = 0;
        std::size_t specs = 0;
        for (const auto& m : req.messages) {
            chars += m.content.size();
            specs += detail::count_occurrences(m.content, "<tool_spec>");
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const auto& desc = pool.spec(pool.members[i]).description();
                if (!seen_description[i] && !desc.empty() && m.content.find(desc) != std::string::npos) seen_description[i] = true;
            }
        }
        const std::size_t dialogue_chars = render_dialogue(dialogue).size();
        audit.min_tool_specs = audit.prompts == 0 ? specs : std::min(audit.min_tool_specs, specs);
        audit.max_tool_specs = std::max(audit.max_tool_specs, specs);
        ++audit.prompts;
        audit.prompt_chars.push_back(chars);
        audit.max_prompt_chars = std::max(audit.max_prompt_chars, chars);
        audit.max_static_chars = std::max(audit.max_static_chars, chars - dialogue_chars);
        return reasoner(req);
    };

    auto finish_audit = [&] {
        audit.catalog_entries = static_cast<std::size_t>(std::count(seen_description.begin(), seen_description.end(), true));
    };

    try {
        while (log.steps.size() < cfg.budget) {
            EpisodeStep step;
            bool closed = false;
            for (std::size_t move_no = 0; move_no < cfg.max_moves_per_step && !closed; ++move_no) {
                const std::string reply = ask();
                step.reasoner_texts.push_back(reply);
                dialogue.push_back({DialogueEntry::Kind::Reasoner, std::string(trim(reply))});
                const ReasonerMove move = parse_reasoner_move(reply);
                switch (move.kind) {
                    case ReasonerMove::Kind::Final:
                        log.final_answer = move.answer;
                        log.outcome = EpisodeOutcome::Finished;
                        log.steps.push_back(std::move(step));
                        finish_audit();
                        return log;
                    case ReasonerMove::Kind::Invalid:
                        step.error = Error(Errc::NotParseable, move.error);
                        dialogue.push_back({DialogueEntry::Kind::Error, move.error});
                        closed = true;
                        break;
                    case ReasonerMove::Kind::Route: {
                        step.need = move.need;
                        std::optional<std::string> label;
                        if (cfg.oracle) label = cfg.oracle(move.need);
                        const auto decision =
                            route(router, RouteRequest{move.need, transcript, pool, label, derive_seed(cfg.seed, "route:" + std::to_string(call_no))}, gateway);
                        step.decision = decision;
                        if (decision.abstained) {
                            dialogue.push_back({DialogueEntry::Kind::Error, "router abstained: " + decision.note});
                        } else {
                            const Json brief{{"candidate", decision.chosen}, {"inputSchema", pool.spec(decision.chosen).input_schema()}};
                            dialogue.push_back({DialogueEntry::Kind::RouteResult, dump_line(brief)});
                        }
                        break;
                    }
                    case ReasonerMove::Kind::Execute: {
                        if (!step.decision || step.decision->abstained) {
                            step.error = Error(Errc::ExecuteBeforeRoute, "execute_candidate without a routed candidate");
                            dialogue.push_back({DialogueEntry::Kind::Error, step.error->what()});
                            closed = true;
                            break;
                        }
                        const std::string& name = step.decision->chosen;
                        step.executed = name;
                        step.arguments = move.arguments;
                        ExecResult result;
                        if (pool.non_callable.count(name)) {
                            result = {false, name + " is not callable"};
                        } else if (Executor* ex = executors.find(name)) {
                            try {
                                result = ex->execute(name, move.arguments);
                            } catch (const std::exception& e) {
                                result = {false, e.what()};
                            }
                        } else {
                            result = {false, "no executor bound for " + name};
                        }
                        step.result = result;
                        dialogue.push_back({result.ok ? DialogueEntry::Kind::ExecuteResult : DialogueEntry::Kind::Error, result.output});
                        transcript.push_back(Action{*step.need, {{name, move.arguments, result.output}}});
                        transcript.push_back(Observation::tool({result.output}));
                        closed = true;
                        break;
                    }
                }
            }
            if (!closed && !step.error) step.error = Error(Errc::BadConfig, "step closed without execution");
            log.steps.push_back(std::move(step));
        }
        log.outcome = EpisodeOutcome::BudgetExhausted;
    } catch (const Error& e) {
        log.outcome = EpisodeOutcome::Error;
        log.error = e.what();
    }
    finish_audit();
    return log;
}

inline Json to_json(const EpisodeLog& log) {
    Json steps = Json::array();
    for (const auto& s : log.steps) {
        Json j{{"reasoner", s.reasoner_texts}};
        if (s.need) j["need"] = *s.need;
        if (s.decision) j["decision"] = to_json(*s.decision);
        if (s.executed) {
            j["executed"] = *s.executed;
            j["arguments"] = s.arguments;
        }
        if (s.result) j["result"] = Json{{"ok", s.result->ok}, {"output", s.result->output}};
        if (s.error) j["error"] = s.error->what();
        steps.push_back(std::move(j));
    }
    const auto& a = log.context_audit;
    Json audit{{"prompts", a.prompts},
               {"max_prompt_chars", a.max_prompt_chars},
               {"max_static_chars", a.max_static_chars},
               {"tool_specs", Json::array({a.min_tool_specs, a.max_tool_specs})},
               {"catalog_entries", a.catalog_entries}};
    Json j{{"task", log.task}, {"outcome", std::string(to_string(log.outcome))}, {"steps", steps}};
    if (log.final_answer) j["final_answer"] = *log.final_answer;
    if (log.error) j["error"] = *log.error;
    j["context_audit"] = audit;
    return j;
}

/// Every executed name equals the decision made in the same step.
inline bool execution_legal(const EpisodeLog& log) {
    for (const auto& s : log.steps) {
        if (!s.executed) continue;
        if (!s.decision || s.decision->abstained || s.decision->chosen != *s.executed) return false;
    }
    return true;
}

}  // namespace hroute

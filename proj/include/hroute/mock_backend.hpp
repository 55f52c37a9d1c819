#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/gateway.hpp"
#include "hroute/json_util.hpp"
#include "hroute/lra.hpp"
#include "hroute/mutation.hpp"
#include "hroute/operators.hpp"
#include "hroute/rng.hpp"
#include "hroute/supervision.hpp"
#include "hroute/trajectory.hpp"

namespace hroute {

/// Offline stand-in for a chat model. Recognises each prompt family the
/// pipeline emits and answers in its expected format, deterministically per
/// (prompt, seed).
class MockChatBackend final : public ChatBackend {
  public:
    using Handler = std::function<std::optional<std::string>(const ChatRequest&)>;

    explicit MockChatBackend(std::uint64_t seed = 0) : seed_(seed) {}

    /// Consulted first; returning nullopt falls through to the built-in roles.
    void set_handler(Handler h) {
        std::lock_guard lock(mu_);
        handler_ = std::move(h);
    }
    /// The next n calls raise TransientFault.
    void fail_next(int n) { transient_left_ = n; }
    void set_unavailable(bool v) { unavailable_ = v; }
    std::uint64_t calls() const noexcept { return calls_; }

    std::string name() const override { return "mock-chat"; }

    ChatResponse complete(const ChatRequest& req) override {
        ++calls_;
        if (unavailable_) throw Error(Errc::BackendUnavailable, "mock backend marked unavailable");
        if (transient_left_ > 0 && transient_left_.fetch_sub(1) > 0) throw TransientFault("mock transient fault");
        Handler h;
        {
            std::lock_guard lock(mu_);
            h = handler_;
        }
        const std::string prompt = req.joined();
        std::string text;
        if (auto planted = h ? h(req) : std::nullopt) text = *planted;
        else text = respond(prompt, derive_seed(seed_ ^ req.seed.value_or(0), prompt));
        return {std::move(text), prompt.size() / 4 + 1, text.size() / 4 + 1};
    }

    std::string respond(const std::string& prompt, std::uint64_t salt) const {
        if (prompt.find(prompts::kMutationMarker) != std::string::npos) return mutate(prompt, salt);
        if (prompt.find(prompts::kTaskDesigner) != std::string::npos) return design_task(prompt);
        if (prompt.find(prompts::kUserSimulator) != std::string::npos) return play_user(prompt);
        if (prompt.find(prompts::kAssistantSimulator) != std::string::npos) return play_assistant(prompt, salt);
        if (prompt.find(prompts::kToolSimulator) != std::string::npos) return play_tool(prompt, salt);
        if (prompt.find(prompts::kLightRoutingAgent) != std::string::npos) return play_reasoner(prompt);
        if (prompt.find("You are an Agent Router.") != std::string::npos) return play_router(prompt, "agents");
        if (prompt.find("You are a Tool Router.") != std::string::npos) return play_router(prompt, "tools");
        return "OK";
    }

  private:
    static std::string hex6(std::uint64_t v) {
        static const char* digits = "0123456789abcdef";
        std::string s(6, '0');
        for (int i = 5; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        return s;
    }

    static bool is_hex6(std::string_view s) {
        return s.size() == 6 && std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) && !std::isupper(static_cast<unsigned char>(c)); });
    }

    /// Base name without "_agent" and without earlier "_<word>_<hex6>" suffixes.
    static std::string stem_of(std::string name) {
        if (name.size() > 6 && name.ends_with("_agent")) name.resize(name.size() - 6);
        while (true) {
            const auto last = name.rfind('_');
            if (last == std::string::npos || !is_hex6(std::string_view(name).substr(last + 1))) break;
            const auto prev = name.rfind('_', last - 1);
            if (prev == std::string::npos || prev == 0) break;
            name.resize(prev);
        }
        return name;
    }

    static std::optional<Json> json_after(const std::string& text, std::string_view open, std::string_view close) {
        auto body = extract_between(text, open, close);
        if (!body) return std::nullopt;
        Json j = Json::parse(*body, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        return j;
    }

    static std::string first_words(std::string_view text, std::size_t n) {
        std::string out;
        std::size_t words = 0;
        for (std::size_t i = 0; i < text.size() && words < n; ++i) {
            const char c = text[i];
            if (c == '.' || c == '\n') break;
            if (c == ' ') ++words;
            if (words < n) out += c;
        }
        return std::string(trim(out));
    }

    static const OperatorInfo* operator_in(const std::string& prompt) {
        const auto key = std::string("## Mutation Strategy: ");
        const auto pos = prompt.find(key);
        if (pos == std::string::npos) return nullptr;
        const auto end = prompt.find('\n', pos);
        const std::string display = prompt.substr(pos + key.size(), end - pos - key.size());
        for (const auto& info : kOperators)
            if (info.display_name == display) return &info;
        return nullptr;
    }

    static std::string op_word(MutationOperator op) {
        switch (op) {
            case MutationOperator::UsageExtension: return "extended";
            case MutationOperator::FunctionEnhancement: return "enhanced";
            case MutationOperator::WorkflowChain: return "chain";
            case MutationOperator::HelperTool: return "helper";
            case MutationOperator::ParameterRedesign: return "redesigned";
            case MutationOperator::DomainTransfer: return "transfer";
            case MutationOperator::CapabilityEnhancement: return "plus";
            case MutationOperator::WorkflowSpecialization: return "specialized";
            case MutationOperator::ToolComposition: return "composed";
            case MutationOperator::ScenarioAdaptation: return "adapted";
        }
        return "variant";
    }

    static Json mutate_schema(Json schema, MutationOperator op, bool describe_all) {
        if (!schema.is_object()) schema = Json{{"type", "object"}};
        schema["type"] = "object";
        Json props = schema.value("properties", Json::object());
        Json required = schema.value("required", Json::array());
        auto add = [&](const std::string& key, Json prop) {
            if (!props.contains(key)) props[key] = std::move(prop);
        };
        switch (op) {
            case MutationOperator::UsageExtension:
            case MutationOperator::DomainTransfer:
                add("context", {{"type", "string"}, {"description", "Additional context for the new usage scenario"}});
                break;
            case MutationOperator::FunctionEnhancement:
            case MutationOperator::CapabilityEnhancement:
                add("options", {{"type", "object"}, {"description", "Advanced options enabling the enhanced behaviour"}});
                add("max_results", {{"type", "integer"}, {"description", "Upper bound on returned items"}, {"default", 10}});
                break;
            case MutationOperator::WorkflowChain:
            case MutationOperator::WorkflowSpecialization:
                add("next_step", {{"type", "string"}, {"description", "Follow-up operation to run on the output"}});
                break;
            case MutationOperator::HelperTool:
            case MutationOperator::ToolComposition: {
                Json kept = Json::object();
                std::string first;
                for (const auto& r : required)
                    if (r.is_string() && props.contains(r.get<std::string>())) {
                        first = r.get<std::string>();
                        break;
                    }
                if (!first.empty()) kept[first] = props[first];
                props = std::move(kept);
                required = first.empty() ? Json::array() : Json::array({first});
                add("target", {{"type", "string"}, {"description", "Item the helper operates on"}});
                break;
            }
            case MutationOperator::ParameterRedesign:
            case MutationOperator::ScenarioAdaptation:
                add("format", {{"type", "string"}, {"description", "Output format"}, {"enum", {"json", "text", "markdown"}}, {"default", "json"}});
                required = Json::array();
                break;
        }
        if (describe_all)
            for (auto& [key, p] : props.items())
                if (p.is_object() && !p.contains("description")) p["description"] = "The " + key + " setting";
        schema["properties"] = std::move(props);
        schema["required"] = std::move(required);
        return schema;
    }

    std::string mutate(const std::string& prompt, std::uint64_t salt) const {
        const OperatorInfo* info = operator_in(prompt);
        if (!info) return "I could not identify the mutation strategy.";
        Rng rng(salt);
        const std::string word = op_word(info->op);
        Json out = Json::object();
        if (info->family == CandidateKind::Tool) {
            auto base = json_after(prompt, "## Original Tool Analysis\n\n", "\n\n## Mutation Strategy");
            if (!base || !base->is_object()) return "unparseable base tool";
            const std::string name = stem_of(base->value("name", std::string("tool"))) + "_" + word + "_" + hex6(rng.next());
            out["name"] = name;
            out["description"] = std::string(info->display_name) + " of an existing tool. " + base->value("description", std::string());
            out["inputSchema"] = mutate_schema(base->value("inputSchema", Json::object()), info->op, false);
            out["tags"] = base->value("tags", Json::array());
        } else {
            const auto name_line = extract_between(prompt, "**Agent Name**: ", "\n");
            const auto desc_line = extract_between(prompt, "**Description**: ", "\n");
            auto tools = json_after(prompt, "**Tools Used by This Agent**:\n\n", "\n\n**Agent InputSchema");
            auto schema = json_after(prompt, "**Agent InputSchema (Parameters)**:\n\n", "\n\n## Mutation Strategy");
            if (!name_line || !tools || !tools->is_array()) return "unparseable base agent";
            out["name"] = stem_of(std::string(*name_line)) + "_" + word + "_" + hex6(rng.next()) + "_agent";
            out["description"] = std::string(info->display_name) + " of an existing agent. " + std::string(desc_line.value_or(""));
            std::vector<std::string> names;
            for (const auto& t : *tools)
                if (t.is_string() && std::find(names.begin(), names.end(), t.get<std::string>()) == names.end()) names.push_back(t.get<std::string>());
            auto push = [&](std::string t) {
                if (std::find(names.begin(), names.end(), t) == names.end()) names.push_back(std::move(t));
            };
            const std::size_t extra = 1 + rng.below(3);
            for (std::size_t i = 0; i < extra; ++i) push(word + "_step_" + std::to_string(i + 1));
            for (std::size_t i = 0; names.size() < 4; ++i) push(word + "_support_" + std::to_string(i + 1));
            if (names.size() > 8) names.erase(names.begin() + 2, names.begin() + static_cast<std::ptrdiff_t>(names.size() - 6));
            out["tools"] = names;
            out["inputSchema"] = mutate_schema(schema.value_or(Json::object()), info->op, true);
            out["tags"] = Json::array({word + " agent"});
        }
        const std::string body = dump_pretty(out);
        return rng.below(5) == 0 ? "```json\n" + body + "\n```" : body;
    }

    /// One step per offered candidate, in the order offered.
    std::string design_task(const std::string& prompt) const {
        auto cands = json_after(prompt, "<candidates>\n", "\n</candidates>");
        if (!cands || !cands->is_array() || cands->empty()) return "{}";
        Json arr = Json::array();
        std::string task = "I need help with a few things:";
        for (std::size_t i = 0; i < cands->size(); ++i) {
            const auto& c = (*cands)[i];
            std::string goal = "use " + c.value("name", std::string()) + " to " + first_words(c.value("description", std::string()), 10);
            task += (i ? "; then " : " ") + goal;
            arr.push_back(Json{{"goal", goal}, {"candidate", c.value("name", std::string())}});
        }
        return dump_pretty(Json{{"task", task + "."}, {"steps", arr}});
    }

    std::string play_user(const std::string& prompt) const {
        auto state = json_after(prompt, "<state>", "</state>");
        if (!state) return "Please continue.";
        const std::string goal = (*state)["next_goal"].is_string() ? (*state)["next_goal"].get<std::string>() : "finish up";
        if (state->value("phase", std::string()) == "opening")
            return "Hi! " + state->value("task", std::string()) + " Let's start: please " + goal + ".";
        if (state->value("last_result_failed", false)) return "That did not work. Please try again: " + goal + ".";
        return "Thanks, that helps. Next, please " + goal + ".";
    }

    std::string play_assistant(const std::string& prompt, std::uint64_t salt) const {
        auto state = json_after(prompt, "<state>", "</state>");
        auto cands = json_after(prompt, "<candidates>\n", "\n</candidates>");
        if (!state || !cands) return "{\"content\": \"I am not sure how to proceed.\", \"calls\": []}";
        const Json remaining = state->value("remaining_steps", Json::array());
        if (state->value("last_result_failed", false))
            return dump_line(Json{{"content", "<think>The last call returned an error.</think> The previous call failed, so "
                                              "I could not complete that step yet."},
                                  {"calls", Json::array()}});
        if (remaining.empty())
            return dump_line(Json{{"content", "<think>Every step is done.</think> All requested steps are complete; here "
                                              "is a summary of the results."},
                                  {"calls", Json::array()}});
        auto schema_of = [&](const std::string& name) {
            for (const auto& c : *cands)
                if (c.value("name", std::string()) == name) return c.value("inputSchema", Json::object());
            return Json(Json::object());
        };
        const int max_calls = state->value("max_calls", 1);
        Json calls = Json::array();
        const std::string first = remaining[0].value("candidate", std::string());
        calls.push_back(Json{{"name", first}, {"arguments", example_arguments(schema_of(first), salt)}});
        if (max_calls >= 2 && remaining.size() >= 2 && salt % 4 == 0) {
            const std::string second = remaining[1].value("candidate", std::string());
            if (second != first) calls.push_back(Json{{"name", second}, {"arguments", example_arguments(schema_of(second), salt >> 8)}});
        }
        std::string content = "<think>Next: " + remaining[0].value("goal", std::string()) + ".</think> I will call " + first;
        if (calls.size() > 1) content += " and " + calls[1]["name"].get<std::string>();
        return dump_line(Json{{"content", content + "."}, {"calls", calls}});
    }

    std::string play_tool(const std::string& prompt, std::uint64_t salt) const {
        auto call = json_after(prompt, "<call>", "</call>");
        if (!call) return "{}";
        const std::string name = call->value("name", std::string());
        if (call->value("simulate_failure", false))
            return "Error: " + name + " failed with status 503 (service temporarily unavailable).";
        return dump_line(Json{{"status", "ok"}, {"candidate", name}, {"items", static_cast<int>(1 + salt % 5)}, {"id", hex6(salt)}});
    }

    std::string play_reasoner(const std::string& prompt) const {
        const auto task = extract_between(prompt, "<task>", "</task>");
        const auto dialogue = extract_between(prompt, "<dialogue>\n", "\n</dialogue>");
        std::vector<std::string> needs;
        if (task) {
            std::string_view t = *task;
            std::size_t pos = 0;
            while (pos <= t.size()) {
                auto semi = t.find(';', pos);
                if (semi == std::string_view::npos) semi = t.size();
                auto piece = trim(t.substr(pos, semi - pos));
                if (!piece.empty()) needs.emplace_back(piece);
                pos = semi + 1;
            }
        }
        std::size_t done = 0;
        std::string last_label;
        std::string last_text;
        if (dialogue) {
            std::size_t pos = 0;
            std::string_view d = *dialogue;
            while (pos < d.size()) {
                auto nl = d.find('\n', pos);
                if (nl == std::string_view::npos) nl = d.size();
                const auto line = d.substr(pos, nl - pos);
                pos = nl + 1;
                const auto colon = line.find(": ");
                if (colon == std::string_view::npos) continue;
                last_label = std::string(line.substr(0, colon));
                last_text = std::string(line.substr(colon + 2));
                if (last_label == "Result[execute_candidate]") ++done;
            }
        }
        if (done >= needs.size())
            return dump_line(Json{{"final_answer", "Completed " + std::to_string(done) + " step(s)."}});
        if (last_label == "Result[route_candidate]") {
            Json brief = Json::parse(last_text, nullptr, false);
            const Json schema = brief.is_object() ? brief.value("inputSchema", Json::object()) : Json::object();
            return dump_line(Json{{"tool", prompts::kExecuteTool}, {"arguments", {{"arguments", example_arguments(schema, done)}}}});
        }
        return dump_line(Json{{"tool", prompts::kRouteTool}, {"arguments", {{"need", needs[done]}}}});
    }

    std::string play_router(const std::string& prompt, const std::string& block) const {
        std::set<std::string> context;
        auto collect = [](std::string_view text, std::set<std::string>& out) {
            MockEmbeddingBackend::for_each_token(text, [&](std::string_view tok) { out.emplace(tok); });
        };
        if (auto q = extract_between(prompt, "<current query>", "</current query>")) collect(*q, context);
        if (auto h = extract_between(prompt, "<history>", "</history>")) collect(*h, context);
        auto pool = json_after(prompt, "<" + block + ">", "</" + block + ">");
        if (!pool || !pool->is_array() || pool->empty()) return "<think>No candidates were offered.</think>\n[]";
        std::string best;
        std::size_t best_score = 0;
        for (const auto& c : *pool) {
            const std::string name = c.value("name", std::string());
            std::set<std::string> own;
            collect(name + " " + c.value("description", std::string()), own);
            std::size_t score = 0;
            for (const auto& t : own) score += context.count(t);
            if (best.empty() || score > best_score || (score == best_score && name < best)) {
                best = name;
                best_score = score;
            }
        }
        return "<think>\n" + best + " shares the most terms with the request and its history.\n</think>\n\n[\"" + best + "\"]";
    }

    std::uint64_t seed_;
    mutable std::mutex mu_;
    Handler handler_;
    std::atomic<int> transient_left_{0};
    std::atomic<bool> unavailable_{false};
    std::atomic<std::uint64_t> calls_{0};
};

/// Gateway over the mock chat model and the hashing embedder, with backoff
/// sleeps disabled.
inline std::shared_ptr<Gateway> make_mock_gateway(std::uint64_t seed, GatewayConfig cfg = {},
                                                  std::shared_ptr<MockChatBackend>* chat_out = nullptr) {
    auto chat = std::make_shared<MockChatBackend>(seed);
    if (chat_out) *chat_out = chat;
    auto gw = std::make_shared<Gateway>(chat, std::make_shared<MockEmbeddingBackend>(seed), cfg);
    gw->set_sleeper([](std::chrono::milliseconds) {});
    return gw;
}

}  // namespace hroute

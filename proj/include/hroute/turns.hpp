#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/json_util.hpp"

namespace hroute {

struct CandidateCall {
    std::string name;
    Json arguments = Json::object();
    std::string simulated_result;

    bool operator==(const CandidateCall&) const = default;
};

enum class ObservationSource { User, Tool };

/// o_t: a user message, or the results of the previous action's calls.
struct Observation {
    ObservationSource source = ObservationSource::User;
    std::string content;               // user text
    std::vector<std::string> results;  // one per call of the preceding action

    static Observation user(std::string text) { return {ObservationSource::User, std::move(text), {}}; }
    static Observation tool(std::vector<std::string> results) { return {ObservationSource::Tool, {}, std::move(results)}; }
    bool operator==(const Observation&) const = default;
};

/// a_t: assistant text plus zero or more candidate calls.
struct Action {
    std::string content;
    std::vector<CandidateCall> calls;
    bool operator==(const Action&) const = default;
};

using Turn = std::variant<Observation, Action>;

inline bool is_observation(const Turn& t) noexcept { return std::holds_alternative<Observation>(t); }
inline bool is_action(const Turn& t) noexcept { return std::holds_alternative<Action>(t); }

inline constexpr std::string_view kUserPrefix = "User: ";
inline constexpr std::string_view kAssistantPrefix = "Assistant: ";
inline constexpr std::string_view kToolResultsPrefix = "Tool results: ";

inline std::string_view call_tag(CandidateKind kind) noexcept { return kind == CandidateKind::Agent ? "agent_call" : "tool_call"; }

inline std::string render_call(const CandidateCall& c, CandidateKind kind) {
    const std::string tag(call_tag(kind));
    return "<" + tag + ">" + c.name + dump_inline(c.arguments) + "</" + tag + ">";
}

/// Transcript in the router prompt style: "User:" / "Assistant:" lines,
/// call tags on their own lines, "Tool results:" lines, and a blank line
/// before every user message after the first turn.
inline std::string render_transcript(const std::vector<Turn>& turns, CandidateKind kind = CandidateKind::Tool) {
    std::string out;
    auto line = [&](std::string_view l) {
        if (!out.empty()) out += '\n';
        out += l;
    };
    for (std::size_t i = 0; i < turns.size(); ++i) {
        if (const auto* o = std::get_if<Observation>(&turns[i])) {
            for (const auto& r : o->results) line(std::string(kToolResultsPrefix) + r);
            if (o->source == ObservationSource::User || !o->content.empty()) {
                if (!out.empty()) out += '\n';
                line(std::string(kUserPrefix) + o->content);
            }
        } else {
            const auto& a = std::get<Action>(turns[i]);
            line(std::string(kAssistantPrefix) + a.content);
            for (const auto& c : a.calls) line(render_call(c, kind));
        }
    }
    return out;
}

/// The text routed on when an observation is the current query.
inline std::string query_text(const Observation& o) {
    if (o.source == ObservationSource::User) return o.content;
    std::string out;
    for (const auto& r : o.results) {
        if (!out.empty()) out += '\n';
        out += std::string(kToolResultsPrefix) + r;
    }
    if (!o.content.empty()) out += (out.empty() ? "" : "\n") + o.content;
    return out;
}

namespace detail {

inline bool parse_call_line(std::string_view line, CandidateCall& out) {
    for (std::string_view tag : {"agent_call", "tool_call"}) {
        const std::string open = "<" + std::string(tag) + ">";
        const std::string close = "</" + std::string(tag) + ">";
        if (!starts_with(line, open) || line.size() < open.size() + close.size()) continue;
        if (line.substr(line.size() - close.size()) != close) continue;
        std::string_view body = line.substr(open.size(), line.size() - open.size() - close.size());
        const auto brace = body.find('{');
        if (brace == std::string_view::npos) {
            out = {std::string(trim(body)), Json::object(), {}};
            return true;
        }
        try {
            out = {std::string(trim(body.substr(0, brace))), Json::parse(body.substr(brace)), {}};
        } catch (const Json::parse_error&) {
            return false;
        }
        return true;
    }
    return false;
}

}  // namespace detail

/// Inverse of render_transcript for well-formed transcripts. Continuation
/// lines extend the text of the current turn. Simulated call results are
/// not part of the rendering and come back empty.
inline std::vector<Turn> parse_transcript(std::string_view text) {
    std::vector<Turn> turns;
    std::string pending_blank;
    enum class Field { None, UserContent, Result, ActionContent } field = Field::None;

    auto append = [&](std::string& target, std::string_view l) {
        target += pending_blank;
        target += '\n';
        target += l;
        pending_blank.clear();
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view l = text.substr(pos, nl - pos);
        pos = nl + 1;

        CandidateCall call;
        if (starts_with(l, kUserPrefix) || l == "User:") {
            const std::string content(l.size() > kUserPrefix.size() ? l.substr(kUserPrefix.size()) : std::string_view{});
            auto* prev = turns.empty() ? nullptr : std::get_if<Observation>(&turns.back());
            if (prev && prev->source == ObservationSource::Tool && prev->content.empty()) {
                prev->content = content;
            } else {
                turns.emplace_back(Observation::user(content));
            }
            field = Field::UserContent;
        } else if (starts_with(l, kToolResultsPrefix)) {
            std::string r(l.substr(kToolResultsPrefix.size()));
            auto* prev = turns.empty() ? nullptr : std::get_if<Observation>(&turns.back());
            if (prev && prev->source == ObservationSource::Tool && prev->content.empty()) {
                prev->results.push_back(std::move(r));
            } else {
                turns.emplace_back(Observation::tool({std::move(r)}));
            }
            field = Field::Result;
        } else if (starts_with(l, kAssistantPrefix) || l == "Assistant:") {
            Action a;
            if (l.size() > kAssistantPrefix.size()) a.content = std::string(l.substr(kAssistantPrefix.size()));
            turns.emplace_back(std::move(a));
            field = Field::ActionContent;
        } else if (!turns.empty() && is_action(turns.back()) && detail::parse_call_line(l, call)) {
            std::get<Action>(turns.back()).calls.push_back(std::move(call));
            field = Field::None;
        } else if (l.empty()) {
            if (field != Field::None) pending_blank += '\n';
            continue;
        } else if (!turns.empty()) {
            if (auto* o = std::get_if<Observation>(&turns.back())) {
                if (field == Field::Result && !o->results.empty()) append(o->results.back(), l);
                else append(o->content, l);
            } else {
                auto& a = std::get<Action>(turns.back());
                if (a.calls.empty()) append(a.content, l);
            }
            continue;
        }
        pending_blank.clear();
    }
    return turns;
}

inline Json to_json(const Turn& t) {
    if (const auto* o = std::get_if<Observation>(&t)) {
        Json j{{"type", "observation"}, {"source", o->source == ObservationSource::User ? "user" : "tool"}};
        if (o->source == ObservationSource::User || !o->content.empty()) j["content"] = o->content;
        if (!o->results.empty() || o->source == ObservationSource::Tool) j["results"] = o->results;
        return j;
    }
    const auto& a = std::get<Action>(t);
    Json calls = Json::array();
    for (const auto& c : a.calls) calls.push_back(Json{{"name", c.name}, {"arguments", c.arguments}, {"result", c.simulated_result}});
    return Json{{"type", "action"}, {"content", a.content}, {"calls", calls}};
}

inline Turn turn_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "observation") {
        Observation o;
        o.source = j.value("source", std::string("user")) == "tool" ? ObservationSource::Tool : ObservationSource::User;
        o.content = j.value("content", std::string());
        o.results = j.value("results", std::vector<std::string>{});
        return o;
    }
    if (type != "action") throw Error(Errc::ParseError, "unknown turn type " + type);
    Action a;
    a.content = j.value("content", std::string());
    for (const auto& c : j.value("calls", Json::array()))
        a.calls.push_back({c.at("name").get<std::string>(), c.value("arguments", Json::object()), c.value("result", std::string())});
    return a;
}

inline Json turns_to_json(const std::vector<Turn>& turns) {
    Json arr = Json::array();
    for (const auto& t : turns) arr.push_back(to_json(t));
    return arr;
}

inline std::vector<Turn> turns_from_json(const Json& arr) {
    std::vector<Turn> out;
    for (const auto& j : arr) out.push_back(turn_from_json(j));
    return out;
}

}  // namespace hroute

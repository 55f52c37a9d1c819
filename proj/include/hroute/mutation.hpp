#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hroute/candidate.hpp"
#include "hroute/error.hpp"
#include "hroute/gateway.hpp"
#include "hroute/graph.hpp"
#include "hroute/json_util.hpp"
#include "hroute/operators.hpp"
#include "hroute/rng.hpp"

namespace hroute {

struct MutationChoice {
    std::string candidate;
    MutationOperator op;
    bool operator==(const MutationChoice&) const = default;
};

/// Uniform over nodes of `kind`, then over that family's operators (or by
/// `operator_weights` when given, one weight per operator in taxonomy order).
inline MutationChoice pick_mutation(const CandidateGraph& graph, CandidateKind kind, Rng& rng,
                                    const std::vector<double>& operator_weights = {}) {
    if (graph.empty()) throw Error(Errc::EmptyGraph, "cannot pick a mutation from an empty graph");
    const auto names = graph.names_of_kind(kind);
    if (names.empty()) throw Error(Errc::EmptyGraph, "graph has no " + std::string(to_string(kind)) + " nodes");
    const auto ops = operators_for(kind);
    const std::string& name = names[rng.below(names.size())];
    const std::size_t op_index = operator_weights.size() == ops.size() ? rng.weighted(operator_weights) : rng.below(ops.size());
    return {name, ops[op_index].op};
}

inline MutationChoice pick_mutation(const CandidateGraph& graph, std::uint64_t rng_seed) {
    if (graph.empty()) throw Error(Errc::EmptyGraph, "cannot pick a mutation from an empty graph");
    Rng rng(rng_seed);
    return pick_mutation(graph, graph.nodes().front().spec.kind(), rng);
}

namespace prompts {

inline constexpr std::string_view kMutationMarker = "Perform a **MUTATION OPERATION** on the given";

inline std::string tags_literal(const std::vector<std::string>& tags) { return dump_inline(Json(tags)); }

inline std::string tool_mutation(const CandidateSpec& base, const OperatorInfo& op) {
    Json base_doc = Json::object();
    base_doc["name"] = base.name();
    base_doc["description"] = base.description();
    base_doc["inputSchema"] = base.input_schema();
    base_doc["tags"] = base.tags();
    const std::string tags = tags_literal(base.tags());
    std::string p;
    p += "# Role: Expert Tool Designer\n\n";
    p += "You are an expert tool designer specializing in creating innovative software tools through genetic "
         "algorithm-inspired mutations. Your expertise includes API design, parameter optimization, and functional "
         "enhancement.\n\n";
    p += "## Your Task\n\n";
    p += "Perform a **MUTATION OPERATION** on the given tool to create a new, related but distinct tool that serves a "
         "similar domain but with meaningful innovations.\n\n";
    p += "## Original Tool Analysis\n\n";
    p += dump_pretty(base_doc) + "\n\n";
    p += "## Mutation Strategy: " + std::string(op.display_name) + "\n\n";
    p += std::string(op.description) + "\n\n";
    p += "## Design Requirements\n\n";
    p += "### Functional Requirements:\n";
    p += "- **Innovation**: Create meaningful functional differences while maintaining domain relevance\n";
    p += "- **Utility**: Ensure the new tool solves a real problem or improves upon existing functionality\n";
    p += "- **Compatibility**: Maintain similar complexity level and use case applicability\n\n";
    p += "### Technical Requirements:\n";
    p += "- **Parameters**: Design intuitive, well-typed parameters following JSON Schema standards\n";
    p += "- **Naming**: Use clear, descriptive names that immediately convey purpose\n";
    p += "- **Documentation**: Write concise but comprehensive descriptions\n";
    p += "- **Validation**: Include appropriate parameter validation and constraints\n\n";
    p += "### Constraints:\n";
    p += "- Keep the same domain tags: " + tags + "\n";
    p += "- Avoid direct copying -- ensure meaningful differentiation\n";
    p += "- Maintain professional tool naming conventions\n";
    p += "- Focus on practical, implementable functionality\n\n";
    p += "## Expected Output\n\n";
    p += "Return **ONLY** valid JSON in this exact format (no markdown, no extra text):\n\n";
    p += "{\n";
    p += "  \"name\": \"descriptive_tool_name\",\n";
    p += "  \"description\": \"Clear, actionable description of what this tool does and why it's useful\",\n";
    p += "  \"inputSchema\": {\n";
    p += "    \"type\": \"object\",\n";
    p += "    \"properties\": {\n";
    p += "      \"parameter_name\": {\n";
    p += "        \"type\": \"appropriate_type\",\n";
    p += "        \"description\": \"What this parameter does and how to use it\",\n";
    p += "        \"default\": \"optional_default_value\"\n";
    p += "      }\n";
    p += "    },\n";
    p += "    \"required\": [\"list_required_parameters\"]\n";
    p += "  },\n";
    p += "  \"tags\": " + tags + "\n";
    p += "}\n\n";
    p += "**CRITICAL**: Use only double quotes, no single quotes. No markdown formatting.\n\n";
    p += "**Note**: Only include a \"results\" field if the tool produces structured output that requires explicit "
         "definition.\n\n";
    p += "## Quality Checklist\n";
    p += "- Tool name is descriptive and unique\n";
    p += "- Description clearly explains purpose and value\n";
    p += "- Parameters are well-designed with proper types\n";
    p += "- Required parameters are logically necessary\n";
    p += "- JSON syntax is valid and complete\n";
    return p;
}

inline std::string agent_mutation(const CandidateSpec& base, const OperatorInfo& op) {
    const auto& agent = base.agent();
    std::string p;
    p += "# Role: Expert Agent Architect\n\n";
    p += "You are an expert AI agent architect specializing in designing autonomous agents through genetic "
         "algorithm-inspired mutations. Your expertise includes agent workflow design, tool orchestration, and "
         "capability planning.\n\n";
    p += "## Your Task\n\n";
    p += "Perform a **MUTATION OPERATION** on the given agent to create a new, related but distinct agent that serves "
         "a similar purpose but with meaningful innovations in its capabilities and tool composition.\n\n";
    p += "## Original Agent Analysis\n\n";
    p += "**Agent Name**: " + agent.name + "\n\n";
    p += "**Description**: " + agent.description + "\n\n";
    p += "**Tools Used by This Agent**:\n\n";
    p += dump_pretty(Json(agent.tools)) + "\n\n";
    p += "**Agent InputSchema (Parameters)**:\n\n";
    p += dump_pretty(agent.input_schema) + "\n\n";
    p += "## Mutation Strategy: " + std::string(op.display_name) + "\n\n";
    p += std::string(op.description) + "\n\n";
    p += "## Design Requirements\n\n";
    p += "### Agent Design Principles:\n";
    p += "- **Coherent Toolset**: The tools should work together to accomplish the agent's goals\n";
    p += "- **Clear Workflow**: The agent should have a logical flow of operations\n";
    p += "- **Practical Utility**: The agent should solve real-world problems\n";
    p += "- **Tool Synergy**: Tools should complement each other, not duplicate functionality\n\n";
    p += "### Tool Evolution Guidelines:\n";
    p += "- You may ADD new tools that enhance the agent's capabilities\n";
    p += "- You may MODIFY existing tools to better fit the new agent's purpose\n";
    p += "- You may REMOVE tools that don't align with the new agent's focus\n";
    p += "- You may RENAME tools to reflect their new context\n";
    p += "- Aim for 4-8 tools per agent (not too few, not too many)\n\n";
    p += "### Naming Convention:\n";
    p += "- Agent name MUST end with \"_agent\" suffix\n";
    p += "- Use snake_case format\n";
    p += "- Name should clearly indicate the agent's primary function\n";
    p += "- Example: \"code_review_agent\", \"data_analysis_agent\", \"document_qa_agent\"\n\n";
    p += "### Tags Guidelines:\n";
    p += "- Tags should categorize the agent's primary domain or capability\n";
    p += "- Use descriptive tags like: \"code agent\", \"search agent\", \"web agent\", \"data agent\", \"research "
         "agent\", \"automation agent\", \"analysis agent\", \"multimodal agent\", etc.\n";
    p += "- Can include multiple tags if the agent spans multiple domains\n\n";
    p += "## Expected Output\n\n";
    p += "Return **ONLY** valid JSON in this exact format (no markdown, no extra text):\n\n";
    p += "{\n";
    p += "  \"name\": \"descriptive_name_agent\",\n";
    p += "  \"description\": \"Clear description of what this agent does, its primary use cases, and how it "
         "accomplishes its goals\",\n";
    p += "  \"tools\": [\n";
    p += "    \"tool_name_1\",\n";
    p += "    \"tool_name_2\",\n";
    p += "    \"tool_name_3\"\n";
    p += "  ],\n";
    p += "  \"inputSchema\": {\n";
    p += "    \"type\": \"object\",\n";
    p += "    \"properties\": {\n";
    p += "      \"parameter_name\": {\n";
    p += "        \"type\": \"appropriate_type\",\n";
    p += "        \"description\": \"Detailed description of what this parameter configures for the agent\"\n";
    p += "      }\n";
    p += "    }\n";
    p += "  },\n";
    p += "  \"tags\": [\"category agent\"]\n";
    p += "}\n\n";
    p += "**CRITICAL REQUIREMENTS:**\n";
    p += "- Agent name MUST end with \"_agent\"\n";
    p += "- Use only double quotes, no single quotes\n";
    p += "- No markdown formatting\n";
    p += "- Tools array should contain 4-8 tool names\n";
    p += "- Each tool name should be descriptive and use snake_case\n";
    p += "- Tags should be descriptive category labels (e.g., \"code agent\", \"search agent\", \"web agent\")\n";
    p += "- Each parameter in inputSchema.properties MUST have a detailed \"description\" field\n\n";
    p += "## Quality Checklist\n";
    p += "- Agent name ends with \"_agent\" and clearly describes purpose\n";
    p += "- Description explains the agent's workflow and capabilities\n";
    p += "- Tools form a coherent set that enables the agent's goals\n";
    p += "- Tools are appropriately evolved from the original (not just copied)\n";
    p += "- Parameters make sense for configuring this agent\n";
    p += "- Each parameter has a clear, detailed description in inputSchema\n";
    p += "- Tags accurately categorize the agent's domain\n";
    p += "- JSON syntax is valid and complete\n";
    return p;
}

}  // namespace prompts

struct MutationPromptOptions {
    double temperature = 0.7;
    int max_tokens = 2048;
    std::string model_id = "mock";
    std::optional<std::uint64_t> seed;
};

inline ChatRequest render_mutation_prompt(const CandidateSpec& base, MutationOperator op,
                                          const MutationPromptOptions& opts = {}) {
    const auto& info = operator_info(op);
    if (info.family != base.kind())
        throw Error(Errc::FamilyMismatch, std::string(info.id) + " does not apply to a " + std::string(to_string(base.kind())));
    ChatRequest req;
    req.messages.push_back({Role::User, base.is_tool() ? prompts::tool_mutation(base, info) : prompts::agent_mutation(base, info)});
    req.temperature = opts.temperature;
    req.max_tokens = opts.max_tokens;
    req.model_id = opts.model_id;
    req.seed = opts.seed;
    return req;
}

/// Parses an LLM reply into a validated mutant stamped with provenance.
/// Tool mutants must keep the base's tags.
inline CandidateSpec parse_mutant(std::string_view response, CandidateKind kind, const CandidateSpec& base, MutationOperator op) {
    const std::string body = strip_code_fence(response);
    Json doc;
    try {
        doc = Json::parse(body);
    } catch (const Json::parse_error& e) {
        throw Error(Errc::NotParseable, e.what());
    }
    if (!doc.is_object()) throw Error(Errc::NotParseable, "mutant is not a JSON object");
    doc.erase("provenance");
    CandidateSpec spec = [&] {
        try {
            return validate_spec(doc, kind, ValidationMode::Strict);
        } catch (const Error& e) {
            throw Error(Errc::ValidationError, e.detail(), e.code());
        }
    }();
    if (spec.name() == base.name()) throw Error(Errc::NameEqualsParent, spec.name());
    if (kind == CandidateKind::Tool && spec.tags() != base.tags()) throw Error(Errc::TagMismatch, spec.name());
    spec.set_provenance(Provenance::mutant(base.name(), op));
    return spec;
}

struct MutationRecord {
    std::string parent;
    MutationOperator op = MutationOperator::UsageExtension;
    std::string raw_response;
    bool accepted = false;
    std::optional<std::string> reject_reason;
    std::optional<std::string> mutant;
    int attempts = 0;
};

inline Json to_json(const MutationRecord& r) {
    Json j{{"parent", r.parent}, {"operator", std::string(to_string(r.op))}, {"accepted", r.accepted}, {"attempts", r.attempts}};
    if (r.mutant) j["mutant"] = *r.mutant;
    if (r.reject_reason) j["reject_reason"] = *r.reject_reason;
    j["raw_response"] = r.raw_response;
    return j;
}

inline void write_mutation_log(const std::vector<MutationRecord>& records, const std::string& path) {
    std::vector<Json> lines;
    for (const auto& r : records) lines.push_back(to_json(r));
    write_records(path, lines);
}

struct EvolveConfig {
    int max_retries = 2;
    /// Probability of mutating an agent rather than a tool when the graph
    /// holds both kinds. Ignored for single-kind graphs.
    double agent_share = 0.5;
    std::vector<double> tool_operator_weights;
    std::vector<double> agent_operator_weights;
    MutationPromptOptions prompt;
    std::uint64_t seed = 0;
};

struct EvolveResult {
    CandidateGraph graph;
    std::vector<MutationRecord> records;
    /// Set when a gateway error aborted the run; graph and records hold the
    /// progress made before it.
    std::optional<Error> aborted;

    std::size_t accepted() const {
        return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.accepted; }));
    }
};

/// rounds iterations of pick -> render -> chat -> parse -> add_mutant. A
/// failed parse or insertion retries the same (parent, operator) with a new
/// sampling seed up to max_retries times, then records a rejection.
inline EvolveResult evolve(CandidateGraph graph, int rounds, const EvolveConfig& cfg, Gateway& gateway) {
    if (rounds < 0) throw Error(Errc::BadConfig, "rounds must be >= 0");
    EvolveResult result{std::move(graph), {}, std::nullopt};
    Rng rng(derive_seed(cfg.seed, "evolve"));
    for (int round = 0; round < rounds; ++round) {
        const bool has_tools = !result.graph.names_of_kind(CandidateKind::Tool).empty();
        const bool has_agents = !result.graph.names_of_kind(CandidateKind::Agent).empty();
        if (!has_tools && !has_agents) throw Error(Errc::EmptyGraph, "cannot evolve an empty graph");
        CandidateKind kind = has_tools ? CandidateKind::Tool : CandidateKind::Agent;
        if (has_tools && has_agents) kind = rng.bernoulli(cfg.agent_share) ? CandidateKind::Agent : CandidateKind::Tool;
        const auto& weights = kind == CandidateKind::Tool ? cfg.tool_operator_weights : cfg.agent_operator_weights;
        const MutationChoice choice = pick_mutation(result.graph, kind, rng, weights);
        const CandidateSpec base = result.graph.node(choice.candidate).spec;

        MutationRecord record{choice.candidate, choice.op, {}, false, std::nullopt, std::nullopt, 0};
        for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
            ++record.attempts;
            MutationPromptOptions opts = cfg.prompt;
            opts.seed = derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(round)), static_cast<std::uint64_t>(attempt));
            try {
                record.raw_response = gateway.chat(render_mutation_prompt(base, choice.op, opts));
                CandidateSpec mutant = parse_mutant(record.raw_response, kind, base, choice.op);
                EmbeddingVector emb = gateway.embed_text(serialize_phi(mutant));
                const std::string name = mutant.name();
                insert_mutant(result.graph, choice.candidate, std::move(mutant), std::move(emb));
                record.accepted = true;
                record.mutant = name;
                record.reject_reason.reset();
                break;
            } catch (const Error& e) {
                switch (e.code()) {
                    case Errc::BackendUnavailable:
                    case Errc::BudgetExceeded:
                    case Errc::RetriesExhausted:
                    case Errc::DimensionMismatch:
                        record.reject_reason = e.what();
                        result.records.push_back(std::move(record));
                        result.aborted = e;
                        return result;
                    default:
                        record.reject_reason = e.what();
                }
            }
        }
        result.records.push_back(std::move(record));
    }
    return result;
}

}  // namespace hroute

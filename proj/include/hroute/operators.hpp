#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

namespace hroute {

enum class CandidateKind { Tool, Agent };

constexpr std::string_view to_string(CandidateKind k) noexcept { return k == CandidateKind::Tool ? "tool" : "agent"; }

inline std::optional<CandidateKind> parse_candidate_kind(std::string_view s) noexcept {
    if (s == "tool") return CandidateKind::Tool;
    if (s == "agent") return CandidateKind::Agent;
    return std::nullopt;
}

/// Mutation operators, one family per candidate kind.
enum class MutationOperator {
    UsageExtension,
    FunctionEnhancement,
    WorkflowChain,
    HelperTool,
    ParameterRedesign,
    DomainTransfer,
    CapabilityEnhancement,
    WorkflowSpecialization,
    ToolComposition,
    ScenarioAdaptation,
};

struct OperatorInfo {
    MutationOperator op;
    CandidateKind family;
    std::string_view id;            // stable identifier used in files
    std::string_view display_name;  // name shown in prompts
    std::string_view description;
};

inline constexpr std::array<OperatorInfo, 10> kOperators{{
    {MutationOperator::UsageExtension, CandidateKind::Tool, "UsageExtension", "Usage Extension",
     "Apply the tool's core logic to related new scenarios or domains. Example: analyze_code_quality -> "
     "analyze_document_quality (applies code analysis concepts to documents)."},
    {MutationOperator::FunctionEnhancement, CandidateKind::Tool, "FunctionEnhancement", "Function Enhancement",
     "Substantially expand the tool's capabilities to enable entirely new use cases while maintaining the core "
     "purpose (add 2+ major user-visible features). Example: compress_image -> image_optimization_suite (adds "
     "format conversion + batch processing + quality presets + metadata editing)."},
    {MutationOperator::WorkflowChain, CandidateKind::Tool, "WorkflowChain", "Workflow Chain",
     "Create a tool that works immediately before or after the original tool in a workflow, providing better "
     "inputs or processing outputs. Example: search_web -> prepare_search_keywords (pre-processes queries) or "
     "summarize_search_results (post-processes results)."},
    {MutationOperator::HelperTool, CandidateKind::Tool, "HelperTool", "Helper Tool",
     "Create an independent supporting tool that enhances the ecosystem around the original tool. Example: "
     "create_chart -> validate_chart_data (checks data format before charting) or suggest_chart_colors "
     "(recommends color schemes)."},
    {MutationOperator::ParameterRedesign, CandidateKind::Tool, "ParameterRedesign", "Parameter Redesign",
     "Modify the tool's parameter structure to enable different input patterns or interaction approaches. Focus "
     "on meaningful parameter changes that shift how users provide data or configure behavior. Example: "
     "get_user(user_id: string) -> query_users(filters: object, sort: string, limit: number) (from single lookup "
     "to flexible querying)."},
    {MutationOperator::DomainTransfer, CandidateKind::Agent, "DomainTransfer", "Domain Transfer",
     "Apply the agent's architecture and workflow to a different but related domain. Example: SWE_agent -> "
     "doc_review_agent (adapts the edit/search/validate pattern from code to documents)."},
    {MutationOperator::CapabilityEnhancement, CandidateKind::Agent, "CapabilityEnhancement",
     "Capability Enhancement",
     "Substantially expand the agent's capabilities by adding new tools and extending its scope. Example: "
     "code_search_agent -> code_intelligence_agent (adds semantic analysis, dependency tracking, and refactoring "
     "suggestions)."},
    {MutationOperator::WorkflowSpecialization, CandidateKind::Agent, "WorkflowSpecialization",
     "Workflow Specialization",
     "Create a more focused agent that specializes in a subset of the original agent's workflow. Example: "
     "full_stack_dev_agent -> api_testing_agent (focuses exclusively on API testing with specialized validation "
     "tools)."},
    {MutationOperator::ToolComposition, CandidateKind::Agent, "ToolComposition", "Tool Composition",
     "Recombine and restructure the agent's tools to create new workflow patterns. Example: data_pipeline_agent "
     "-> realtime_streaming_agent (reorganizes batch processing tools into streaming-compatible tools)."},
    {MutationOperator::ScenarioAdaptation, CandidateKind::Agent, "ScenarioAdaptation", "Scenario Adaptation",
     "Adapt the agent to handle different use case scenarios or user contexts. Example: general_qa_agent -> "
     "customer_support_agent (adapts general QA capabilities specifically for customer service scenarios)."},
}};

constexpr const OperatorInfo& operator_info(MutationOperator op) noexcept {
    return kOperators[static_cast<std::size_t>(op)];
}

constexpr std::string_view to_string(MutationOperator op) noexcept { return operator_info(op).id; }

inline std::optional<MutationOperator> parse_operator(std::string_view id) noexcept {
    for (const auto& info : kOperators)
        if (info.id == id || info.display_name == id) return info.op;
    return std::nullopt;
}

/// The five operators of one family, in taxonomy order.
inline std::span<const OperatorInfo> operators_for(CandidateKind kind) noexcept {
    return kind == CandidateKind::Tool ? std::span<const OperatorInfo>(kOperators.data(), 5)
                                       : std::span<const OperatorInfo>(kOperators.data() + 5, 5);
}

}  // namespace hroute

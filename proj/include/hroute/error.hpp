#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hroute {

enum class Errc {
    MissingField,
    BadAgentName,
    SchemaMalformed,
    DuplicateToolEntry,
    IoError,
    ParseError,
    ValidationError,
    BackendUnavailable,
    BudgetExceeded,
    RetriesExhausted,
    DimensionMismatch,
    ZeroVector,
    EmptyBank,
    UnknownParent,
    DuplicateName,
    EmptyGraph,
    FamilyMismatch,
    NotParseable,
    NameEqualsParent,
    TagMismatch,
    BadConfig,
    OutOfSubsetReference,
    Discarded,
    PoolMissingLabel,
    UnresolvedPoolMember,
    ExecuteBeforeRoute,
    LabelEvicted,
    MissingParameter,
    DatasetFormat,
};

constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::MissingField: return "MissingField";
        case Errc::BadAgentName: return "BadAgentName";
        case Errc::SchemaMalformed: return "SchemaMalformed";
        case Errc::DuplicateToolEntry: return "DuplicateToolEntry";
        case Errc::IoError: return "IoError";
        case Errc::ParseError: return "ParseError";
        case Errc::ValidationError: return "ValidationError";
        case Errc::BackendUnavailable: return "BackendUnavailable";
        case Errc::BudgetExceeded: return "BudgetExceeded";
        case Errc::RetriesExhausted: return "RetriesExhausted";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::EmptyBank: return "EmptyBank";
        case Errc::UnknownParent: return "UnknownParent";
        case Errc::DuplicateName: return "DuplicateName";
        case Errc::EmptyGraph: return "EmptyGraph";
        case Errc::FamilyMismatch: return "FamilyMismatch";
        case Errc::NotParseable: return "NotParseable";
        case Errc::NameEqualsParent: return "NameEqualsParent";
        case Errc::TagMismatch: return "TagMismatch";
        case Errc::BadConfig: return "BadConfig";
        case Errc::OutOfSubsetReference: return "OutOfSubsetReference";
        case Errc::Discarded: return "Discarded";
        case Errc::PoolMissingLabel: return "PoolMissingLabel";
        case Errc::UnresolvedPoolMember: return "UnresolvedPoolMember";
        case Errc::ExecuteBeforeRoute: return "ExecuteBeforeRoute";
        case Errc::LabelEvicted: return "LabelEvicted";
        case Errc::MissingParameter: return "MissingParameter";
        case Errc::DatasetFormat: return "DatasetFormat";
    }
    return "Unknown";
}

/// Library-wide exception. `cause` carries the underlying error when a
/// wrapper code is raised, e.g. ValidationError(BadAgentName).
class Error : public std::runtime_error {
  public:
    Error(Errc code, std::string detail, std::optional<Errc> cause = std::nullopt)
        : std::runtime_error(format(code, detail, cause)),
          code_(code),
          cause_(cause),
          detail_(std::move(detail)) {}

    Errc code() const noexcept { return code_; }
    std::optional<Errc> cause() const noexcept { return cause_; }
    const std::string& detail() const noexcept { return detail_; }

    /// True when either the code or the wrapped cause equals `c`.
    bool is(Errc c) const noexcept { return code_ == c || (cause_ && *cause_ == c); }

  private:
    static std::string format(Errc code, const std::string& detail, std::optional<Errc> cause) {
        std::string out(errc_name(code));
        if (cause) {
            out += "(";
            out += errc_name(*cause);
            out += ")";
        }
        if (!detail.empty()) {
            out += ": ";
            out += detail;
        }
        return out;
    }

    Errc code_;
    std::optional<Errc> cause_;
    std::string detail_;
};

}  // namespace hroute

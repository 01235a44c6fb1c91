#include "trop/error.hpp"

namespace trop {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::schema_violation:
        return "SchemaViolation";
    case ErrorCode::referential_integrity:
        return "ReferentialIntegrity";
    case ErrorCode::cyclic_typedef:
        return "CyclicTypedef";
    case ErrorCode::unresolved_typedef:
        return "UnresolvedTypedef";
    case ErrorCode::typedef_conflict:
        return "TypedefConflict";
    case ErrorCode::duplicate_definition:
        return "DuplicateDefinition";
    case ErrorCode::unit_collision:
        return "UnitCollision";
    case ErrorCode::parse_error:
        return "ParseError";
    case ErrorCode::unsupported_construct:
        return "UnsupportedConstruct";
    case ErrorCode::unknown_site:
        return "UnknownSite";
    case ErrorCode::unknown_target:
        return "UnknownTarget";
    case ErrorCode::invalid_argument:
        return "InvalidArgument";
    case ErrorCode::io_error:
        return "IoError";
    case ErrorCode::invariant_violation:
        return "InvariantViolation";
    }
    return "Error";
}

Error::Error(ErrorCode code, std::string subject, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message)
    , code_(code)
    , subject_(std::move(subject))
{
}

} // namespace trop

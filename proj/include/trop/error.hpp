#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trop {

enum class ErrorCode {
    schema_violation,
    referential_integrity,
    cyclic_typedef,
    unresolved_typedef,
    typedef_conflict,
    duplicate_definition,
    unit_collision,
    parse_error,
    unsupported_construct,
    unknown_site,
    unknown_target,
    invalid_argument,
    io_error,
    invariant_violation,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the toolkit. `subject` names the offending entity
// (a typedef name, a JSON path, a site id, ...) so callers can match on it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string subject, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    ErrorCode code_;
    std::string subject_;
};

} // namespace trop

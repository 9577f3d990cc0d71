#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcopt {

/// Machine-readable reason attached to every failure raised by the library.
enum class ErrorCode {
    parse_error,
    validation_error,
    duplicate_id,
    io_error,
    schema_version,
    domain_error,
    rank_deficient,
    too_few_samples,
    missing_coefficient,
    infeasible_battery,
    no_feasible_design,
    unresolved_normalizer,
    unsupported_layout,
    unknown_combo,
    invalid_request,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// A catalog or database record violated one of its invariants.
class ValidationError : public Error {
public:
    ValidationError(std::string record, std::string field, const std::string& message)
        : Error(ErrorCode::validation_error,
                "record '" + record + "', field '" + field + "': " + message),
          record_(std::move(record)),
          field_(std::move(field)) {}

    const std::string& record() const noexcept { return record_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::string record_;
    std::string field_;
};

inline void require_domain(bool condition, const std::string& message) {
    if (!condition) {
        throw Error(ErrorCode::domain_error, message);
    }
}

}  // namespace mcopt

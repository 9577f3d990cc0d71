#include "mcopt/error.hpp"

namespace mcopt {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::validation_error: return "validation_error";
        case ErrorCode::duplicate_id: return "duplicate_id";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::schema_version: return "schema_version";
        case ErrorCode::domain_error: return "domain_error";
        case ErrorCode::rank_deficient: return "rank_deficient";
        case ErrorCode::too_few_samples: return "too_few_samples";
        case ErrorCode::missing_coefficient: return "missing_coefficient";
        case ErrorCode::infeasible_battery: return "infeasible_battery";
        case ErrorCode::no_feasible_design: return "no_feasible_design";
        case ErrorCode::unresolved_normalizer: return "unresolved_normalizer";
        case ErrorCode::unsupported_layout: return "unsupported_layout";
        case ErrorCode::unknown_combo: return "unknown_combo";
        case ErrorCode::invalid_request: return "invalid_request";
    }
    return "unknown";
}

}  // namespace mcopt

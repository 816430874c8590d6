#pragma once

#include <stdexcept>
#include <string>

namespace toolgraph {

// Error taxonomy shared by all modules. Each condition the library can
// report gets its own code so callers can branch without string matching.
enum class ErrorCode {
    duplicate_name,
    empty_name,
    unknown_dependency,
    cycle_detected,
    has_dependents,
    unknown_tool,
    dimension_mismatch,
    empty_graph,
    singular_system,
    transport_error,
    provider_error,
    shape_error,
    synthesizer_error,
    malformed_trace,
    executor_unavailable,
    missing_action,
    multiple_actions,
    unrecognized_action,
    malformed_json_body,
    unterminated_fence,
    io_error,
    corrupt_document,
    version_mismatch,
    invalid_config,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::duplicate_name:       return "DuplicateName";
        case ErrorCode::empty_name:           return "EmptyName";
        case ErrorCode::unknown_dependency:   return "UnknownDependency";
        case ErrorCode::cycle_detected:       return "CycleDetected";
        case ErrorCode::has_dependents:       return "HasDependents";
        case ErrorCode::unknown_tool:         return "UnknownTool";
        case ErrorCode::dimension_mismatch:   return "DimensionMismatch";
        case ErrorCode::empty_graph:          return "EmptyGraph";
        case ErrorCode::singular_system:      return "SingularSystem";
        case ErrorCode::transport_error:      return "TransportError";
        case ErrorCode::provider_error:       return "ProviderError";
        case ErrorCode::shape_error:          return "ShapeError";
        case ErrorCode::synthesizer_error:    return "SynthesizerError";
        case ErrorCode::malformed_trace:      return "MalformedTrace";
        case ErrorCode::executor_unavailable: return "ExecutorUnavailable";
        case ErrorCode::missing_action:       return "MissingAction";
        case ErrorCode::multiple_actions:     return "MultipleActions";
        case ErrorCode::unrecognized_action:  return "UnrecognizedAction";
        case ErrorCode::malformed_json_body:  return "MalformedJSONBody";
        case ErrorCode::unterminated_fence:   return "UnterminatedFence";
        case ErrorCode::io_error:             return "IoError";
        case ErrorCode::corrupt_document:     return "CorruptDocument";
        case ErrorCode::version_mismatch:     return "VersionMismatch";
        case ErrorCode::invalid_config:       return "InvalidConfig";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace toolgraph

#ifndef DPEXPR_ERRORS_HPP
#define DPEXPR_ERRORS_HPP

#include <stdexcept>
#include <string>

/**
 * @file errors.hpp
 * @brief Exception type shared by all dpexpr modules.
 */

namespace dpexpr {

/**
 * Machine-readable reason attached to every `Error`.
 */
enum class ErrorCode {
    // dataset
    NonPositiveValue,
    NonFiniteValue,
    DuplicateId,
    EmptyGroup,
    ShapeMismatch,
    // dp_core
    EmptyWeakPrior,
    QuadratureFailure,
    MissingQuantile,
    OutOfRange,
    // diffexpr / classifier / crossval
    PanelTooLarge,
    NonPositiveExpression,
    InvalidArgument,
    // soft_ingest
    MissingTableMarkers,
    MalformedHeader,
    RaggedRow,
    UnparseableValue,
    MissingValue,
    MissingSubset,
    UnknownSampleId,
    UnknownProbeId,
    Io
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonPositiveValue: return "NonPositiveValue";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyWeakPrior: return "EmptyWeakPrior";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::MissingQuantile: return "MissingQuantile";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::PanelTooLarge: return "PanelTooLarge";
        case ErrorCode::NonPositiveExpression: return "NonPositiveExpression";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::MissingTableMarkers: return "MissingTableMarkers";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::RaggedRow: return "RaggedRow";
        case ErrorCode::UnparseableValue: return "UnparseableValue";
        case ErrorCode::MissingValue: return "MissingValue";
        case ErrorCode::MissingSubset: return "MissingSubset";
        case ErrorCode::UnknownSampleId: return "UnknownSampleId";
        case ErrorCode::UnknownProbeId: return "UnknownProbeId";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/**
 * True for failures of the numerical machinery rather than of the input.
 */
inline bool is_numerical(ErrorCode code) {
    return code == ErrorCode::QuadratureFailure || code == ErrorCode::MissingQuantile || code == ErrorCode::OutOfRange;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message) :
        std::runtime_error(std::string(to_string(code)) + ": " + message), my_code(code) {}

    ErrorCode code() const { return my_code; }

private:
    ErrorCode my_code;
};

}

#endif

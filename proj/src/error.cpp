#include "emospace/error.hpp"

namespace emospace {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::InvalidTemperature: return "InvalidTemperature";
        case ErrorCode::InvalidGate: return "InvalidGate";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::TooManyRows: return "TooManyRows";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::DegenerateBlend: return "DegenerateBlend";
        case ErrorCode::NonPositiveRow: return "NonPositiveRow";
        case ErrorCode::OracleError: return "OracleError";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::VersionError: return "VersionError";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
        case ErrorCode::TooFewSubjects: return "TooFewSubjects";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace emospace

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emospace {

enum class ErrorCode {
    ZeroVector,
    DimMismatch,
    ShapeMismatch,
    EmptyInput,
    EmptyDataset,
    InvalidTemperature,
    InvalidGate,
    InvalidArgument,
    TooManyRows,
    IndexOutOfRange,
    KTooLarge,
    DegenerateBlend,
    NonPositiveRow,
    OracleError,
    FormatError,
    VersionError,
    InvariantViolation,
    DegenerateMarginals,
    TooFewSubjects,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so the
// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace emospace

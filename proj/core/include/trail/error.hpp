#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace trail {

enum class ErrorCode {
    DuplicateId,
    InvariantViolation,
    MissingEndpoint,
    UnknownEntity,
    UnknownEdge,
    UnknownElement,
    TruthImmutable,
    IoFailure,
    MalformedRecord,
    DimensionMismatch,
    ZeroNorm,
    EmptyIndex,
    TransportFailure,
    ScriptExhausted,
    Misconfiguration,
    UnparsableJudgeReply,
    UnparsableReply,
    MalformedConsensus,
    InvalidSelection,
    SeedFailure,
    PreconditionViolation,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the whole engine; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    Error(ErrorCode code, std::string message, std::size_t line)
        : std::runtime_error(std::string(error_code_name(code)) + " (line " +
                             std::to_string(line) + "): " + message),
          code_(code),
          line_(line) {}

    ErrorCode code() const noexcept { return code_; }

    // Set for file-format errors (1-based line of the offending record).
    std::optional<std::size_t> line() const noexcept { return line_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> line_;
};

} // namespace trail

#include "trail/error.hpp"

namespace trail {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::MissingEndpoint: return "MissingEndpoint";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::UnknownEdge: return "UnknownEdge";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::TruthImmutable: return "TruthImmutable";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::Misconfiguration: return "Misconfiguration";
    case ErrorCode::UnparsableJudgeReply: return "UnparsableJudgeReply";
    case ErrorCode::UnparsableReply: return "UnparsableReply";
    case ErrorCode::MalformedConsensus: return "MalformedConsensus";
    case ErrorCode::InvalidSelection: return "InvalidSelection";
    case ErrorCode::SeedFailure: return "SeedFailure";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    }
    return "UnknownError";
}

} // namespace trail

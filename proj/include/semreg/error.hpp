#pragma once

#include <stdexcept>
#include <string>

namespace semreg {

enum class ErrorCode {
    ParseError,
    IndexOutOfRange,
    DegenerateFace,
    EmptyMesh,
    DisconnectedMesh,
    ZeroExtent,
    FactorizationFailed,
    NonFiniteValue,
    ResolutionMismatch,
    NoValidPixels,
    BadMagic,
    VersionMismatch,
    TruncatedFile,
    DimensionMismatch,
    InvalidArgument,
    IoError,
    TargetMismatch,
    PointBehindCamera,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

    const char* code_name() const {
        switch (code_) {
            case ErrorCode::ParseError: return "parse_error";
            case ErrorCode::IndexOutOfRange: return "index_out_of_range";
            case ErrorCode::DegenerateFace: return "degenerate_face";
            case ErrorCode::EmptyMesh: return "empty_mesh";
            case ErrorCode::DisconnectedMesh: return "disconnected_mesh";
            case ErrorCode::ZeroExtent: return "zero_extent";
            case ErrorCode::FactorizationFailed: return "factorization_failed";
            case ErrorCode::NonFiniteValue: return "non_finite_value";
            case ErrorCode::ResolutionMismatch: return "resolution_mismatch";
            case ErrorCode::NoValidPixels: return "no_valid_pixels";
            case ErrorCode::BadMagic: return "bad_magic";
            case ErrorCode::VersionMismatch: return "version_mismatch";
            case ErrorCode::TruncatedFile: return "truncated_file";
            case ErrorCode::DimensionMismatch: return "dimension_mismatch";
            case ErrorCode::InvalidArgument: return "invalid_argument";
            case ErrorCode::IoError: return "io_error";
            case ErrorCode::TargetMismatch: return "target_mismatch";
            case ErrorCode::PointBehindCamera: return "point_behind_camera";
        }
        return "unknown";
    }

    // Process exit code convention: 2 = input error, 3 = numerical failure.
    int exit_code() const {
        switch (code_) {
            case ErrorCode::FactorizationFailed:
            case ErrorCode::NonFiniteValue:
                return 3;
            default:
                return 2;
        }
    }

private:
    ErrorCode code_;
};

} // namespace semreg

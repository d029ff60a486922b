// errors.hpp: error categories shared by every nvbus module

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nvbus {

enum class ErrorKind {
    DimensionMismatch,
    NonpositiveDistance,
    EmptyGrid,
    DimensionTooSmall,
    SlotMismatch,
    LayoutMismatch,
    NotHermitian,
    InvalidState,
    InvalidParameter,
    UnphysicalT2,
    DegenerateSteadyState,
    NonConvergence,
    StepFailure,
    TruncationNotConverged,
    SingularResolvent,
    WindowTooShort,
    WeightsInvalid,
    GridTooCoarse,
    ParseError,
    ValidationError,
    IoError,
    UsageError,
};

constexpr std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonpositiveDistance: return "NonpositiveDistance";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::SlotMismatch: return "SlotMismatch";
    case ErrorKind::LayoutMismatch: return "LayoutMismatch";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::UnphysicalT2: return "UnphysicalT2";
    case ErrorKind::DegenerateSteadyState: return "DegenerateSteadyState";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::TruncationNotConverged: return "TruncationNotConverged";
    case ErrorKind::SingularResolvent: return "SingularResolvent";
    case ErrorKind::WindowTooShort: return "WindowTooShort";
    case ErrorKind::WeightsInvalid: return "WeightsInvalid";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UsageError: return "UsageError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace nvbus

#include "sfk/error.hpp"

namespace sfk
{

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code)
    {
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ColdBuffer: return "ColdBuffer";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::NonExtinguishable: return "NonExtinguishable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::InsufficientBatches: return "InsufficientBatches";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::InfeasibleLP: return "InfeasibleLP";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorCode::SingularDiffusion: return "SingularDiffusion";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

} // namespace sfk

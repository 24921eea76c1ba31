#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfk
{

enum class ErrorCode
{
    SingularCovariance,
    NonFinite,
    OutOfRange,
    ColdBuffer,
    InvalidParameter,
    NonExtinguishable,
    DimensionMismatch,
    StepUnderflow,
    Diverged,
    InsufficientBatches,
    EmptyHistogram,
    InfeasibleLP,
    SingularSystem,
    DomainError,
    ConstraintInfeasible,
    SingularDiffusion,
    ConfigInvalid,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures carry a code so callers (the CLI in particular) can
// map them onto exit statuses without parsing messages.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace sfk

#include "freqtune/errors.hpp"

namespace freqtune
{

const char *to_string(ErrorCode code) noexcept
{
    switch (code)
    {
    case ErrorCode::EmptyDimension:
        return "EmptyDimension";
    case ErrorCode::InvalidAction:
        return "InvalidAction";
    case ErrorCode::InvalidEntry:
        return "InvalidEntry";
    case ErrorCode::DegenerateEnergy:
        return "DegenerateEnergy";
    case ErrorCode::MismatchedExit:
        return "MismatchedExit";
    case ErrorCode::InvalidEvent:
        return "InvalidEvent";
    case ErrorCode::InvalidConfig:
        return "InvalidConfig";
    case ErrorCode::IoFailure:
        return "IoFailure";
    case ErrorCode::IncompatibleSnapshot:
        return "IncompatibleSnapshot";
    case ErrorCode::CorruptSnapshot:
        return "CorruptSnapshot";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

} // namespace freqtune

#pragma once

#include <stdexcept>
#include <string>

namespace freqtune
{

enum class ErrorCode
{
    EmptyDimension,
    InvalidAction,
    InvalidEntry,
    DegenerateEnergy,
    MismatchedExit,
    InvalidEvent,
    InvalidConfig,
    IoFailure,
    IncompatibleSnapshot,
    CorruptSnapshot,
};

const char *to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string &message);

    ErrorCode code() const noexcept
    {
        return code_;
    }

private:
    ErrorCode code_;
};

} // namespace freqtune

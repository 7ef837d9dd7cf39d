#pragma once

#include <stdexcept>
#include <string>

namespace mixrom {

/// Stable error classes; the CLI maps each one to a distinct exit code.
enum class ErrorCode {
    Generic = 1,
    Config = 2,
    Io = 3,
    Format = 4,
    Manifest = 5,
    ShapeMismatch = 6,
    OutOfRange = 7,
    OutOfDomain = 8,
    SingularSystem = 9,
    KTooLarge = 10,
    Divergence = 11,
    EmptyInput = 12,
    MixedDofCount = 13,
    NonPositiveSigma = 14,
    ZeroReference = 15,
    EmptyGrid = 16,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

#define MIXROM_DEFINE_ERROR(NAME, CODE)                         \
    class NAME : public Error {                                 \
    public:                                                     \
        explicit NAME(const std::string& msg)                   \
            : Error(ErrorCode::CODE, msg) {}                    \
    }

MIXROM_DEFINE_ERROR(ConfigError, Config);
MIXROM_DEFINE_ERROR(IoError, Io);
MIXROM_DEFINE_ERROR(FormatError, Format);
MIXROM_DEFINE_ERROR(ManifestError, Manifest);
MIXROM_DEFINE_ERROR(ShapeMismatch, ShapeMismatch);
MIXROM_DEFINE_ERROR(OutOfRange, OutOfRange);
MIXROM_DEFINE_ERROR(OutOfDomain, OutOfDomain);
MIXROM_DEFINE_ERROR(SingularSystem, SingularSystem);
MIXROM_DEFINE_ERROR(KTooLarge, KTooLarge);
MIXROM_DEFINE_ERROR(DivergenceDetected, Divergence);
MIXROM_DEFINE_ERROR(EmptyInput, EmptyInput);
MIXROM_DEFINE_ERROR(MixedDofCount, MixedDofCount);
MIXROM_DEFINE_ERROR(NonPositiveSigma, NonPositiveSigma);
MIXROM_DEFINE_ERROR(ZeroReference, ZeroReference);
MIXROM_DEFINE_ERROR(EmptyGrid, EmptyGrid);

#undef MIXROM_DEFINE_ERROR

} // namespace mixrom

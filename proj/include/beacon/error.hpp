#pragma once

#include <stdexcept>
#include <string>

namespace beacon {

enum class ErrorKind {
    Parse,
    DuplicateId,
    EmptyInput,
    InvalidArgument,
    Io,
    UnsplittableLeaf,
    ProviderUnavailable,
    Protocol,
    SampleFailed,
    IncompleteSample,
    Shape,
    State,
    DegenerateBatch,
    Label,
    Numerical,
    Config,
    MissingArtifact,
    UndefinedCurve,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (notably the
/// CLI) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace beacon

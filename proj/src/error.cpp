#include "beacon/error.hpp"

namespace beacon {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::DuplicateId: return "duplicate id";
        case ErrorKind::EmptyInput: return "empty input";
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::Io: return "io error";
        case ErrorKind::UnsplittableLeaf: return "unsplittable leaf";
        case ErrorKind::ProviderUnavailable: return "provider unavailable";
        case ErrorKind::Protocol: return "protocol error";
        case ErrorKind::SampleFailed: return "sample failed";
        case ErrorKind::IncompleteSample: return "incomplete sample";
        case ErrorKind::Shape: return "shape error";
        case ErrorKind::State: return "state error";
        case ErrorKind::DegenerateBatch: return "degenerate batch";
        case ErrorKind::Label: return "label error";
        case ErrorKind::Numerical: return "numerical failure";
        case ErrorKind::Config: return "config error";
        case ErrorKind::MissingArtifact: return "missing artifact";
        case ErrorKind::UndefinedCurve: return "undefined curve";
    }
    return "error";
}

}  // namespace beacon

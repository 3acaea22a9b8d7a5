#include "dnsembed/error.hpp"

namespace dnsembed {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Input: return "input";
    case ErrorKind::Config: return "config";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::EmptyCatalog: return "empty-catalog";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::State: return "state";
    case ErrorKind::Lookup: return "lookup";
    }
    return "unknown";
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Config:
        return 2;
    case ErrorKind::Numeric:
        return 4;
    default:
        return 3;
    }
}

} // namespace dnsembed

#pragma once

#include <stdexcept>
#include <string>

namespace dnsembed {

enum class ErrorKind {
    Io,           // unreadable / unwritable file or stream
    Format,       // input text does not match the expected layout
    Input,        // a single value failed to parse (e.g. an IPv4 address)
    Config,       // invalid configuration or parameter
    Consistency,  // data structures disagree with each other
    EmptyCatalog, // pruning left nothing to work with
    Degenerate,   // mathematically undefined input (zero matrix, isolated node, one class)
    Numeric,      // solver failure or divergence
    State,        // object used before it was ready
    Lookup,       // unknown entity
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Process exit code for an error kind: 2 config, 3 data, 4 numeric.
int exit_code(ErrorKind kind);

} // namespace dnsembed

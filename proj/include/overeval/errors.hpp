#pragma once

#include <stdexcept>
#include <string>

namespace overeval {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input data. Carries the 1-based line number when known.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg, long line_no = 0)
        : std::runtime_error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
    long line;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Endpoint unreachable or still failing after the retry budget.
struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& msg, int http_status = 0)
        : std::runtime_error(msg), status(http_status) {}
    int status;
};

// Endpoint answered but the completion body is not the expected shape.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resume requested against a manifest written by a different config.
struct RefuseResume : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace overeval

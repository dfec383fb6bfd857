#pragma once

#include <stdexcept>
#include <string>

namespace nullctl {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownWeightName : std::invalid_argument {
    explicit UnknownWeightName(const std::string& name)
        : std::invalid_argument("unknown weight name: " + name) {}
};

struct UnsupportedDerivative : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GrowthViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_no(line) {}
    int line_no;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace nullctl

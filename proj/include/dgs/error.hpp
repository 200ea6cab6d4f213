#pragma once

#include <stdexcept>
#include <string>

namespace dgs {

enum class ErrorCode {
    InvalidArgument = 1,
    InvalidParameter = 2,
    Io = 3,
    Parse = 4,
    Diverged = 5,
    Internal = 6,
};

// All failures inside the core are reported with this exception; the C API
// maps the code onto dgs_status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &what) { throw Error(code, what); }

} // namespace dgs

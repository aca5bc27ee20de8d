#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lpfno {

enum class Errc {
    invalid_argument,
    io,
    missing_field_file,
    length_mismatch,
    schema_version,
    non_finite,
    shape_mismatch,
    mode_capacity,
    divergence,
    not_recorded,
    uninitialized,
    empty_plan,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries a machine-readable code so the
/// CLI and HTTP layers can map it onto exit codes and status codes.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

void log_warning(std::string_view message);

}  // namespace lpfno

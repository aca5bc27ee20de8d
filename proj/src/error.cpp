#include "lpfno/error.hpp"

#include <iostream>
#include <mutex>

namespace lpfno {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::invalid_argument: return "invalid argument";
        case Errc::io: return "i/o failure";
        case Errc::missing_field_file: return "missing field file";
        case Errc::length_mismatch: return "length mismatch";
        case Errc::schema_version: return "unknown schema version";
        case Errc::non_finite: return "non-finite value";
        case Errc::shape_mismatch: return "shape mismatch";
        case Errc::mode_capacity: return "modes not representable on grid";
        case Errc::divergence: return "training diverged";
        case Errc::not_recorded: return "backward without forward";
        case Errc::uninitialized: return "uninitialized state";
        case Errc::empty_plan: return "empty plan";
    }
    return "unknown error";
}

void log_warning(std::string_view message) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::clog << "[lpfno] warning: " << message << '\n';
}

}  // namespace lpfno

#pragma once

#include <stdexcept>
#include <string>

namespace qdscope {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid specs, invalid config files, unknown keys, violated invariants.
struct config_error : error {
    using error::error;
};

// Adaptive integration could not meet the tolerance within its step budget.
struct integration_error : error {
    double last_good_time;
    integration_error(const std::string& msg, double t_last)
        : error(msg), last_good_time(t_last) {}
};

// Fit-engine failures.
struct fit_error : error {
    using error::error;
};
struct rank_deficiency_error : fit_error {
    using fit_error::fit_error;
};
struct no_peak_error : fit_error {
    using fit_error::fit_error;
};
struct empty_reconstruction_error : fit_error {
    using fit_error::fit_error;
};

// File system and parsing-of-our-own-artifacts problems.
struct io_error : error {
    using error::error;
};

} // namespace qdscope

#pragma once

#include <stdexcept>
#include <string>

namespace torusflow {

/// Bad sizes, mismatched grids, invalid arguments.
class invalid_argument_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf encountered, or a scheme left its stability envelope.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what, double last_stable_time = -1.0)
        : std::runtime_error(what), last_stable_time_(last_stable_time) {}
    double last_stable_time() const { return last_stable_time_; }

private:
    double last_stable_time_;
};

/// Map inversion did not reach the requested tolerance.
class inversion_error : public std::runtime_error {
public:
    inversion_error(const std::string& what, double worst_residual)
        : std::runtime_error(what), worst_residual_(worst_residual) {}
    double worst_residual() const { return worst_residual_; }

private:
    double worst_residual_;
};

/// Jacobian determinant collapsed below the resolvable threshold.
class resolution_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Picard window shrank below the configured minimum without converging.
class nonconvergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File missing, unreadable, or malformed.
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline bool& warnings_enabled() {
    static bool enabled = true;
    return enabled;
}
} // namespace detail

inline void set_warnings_enabled(bool on) { detail::warnings_enabled() = on; }

void warn(const std::string& message);

} // namespace torusflow

#include <iostream>

namespace torusflow {
inline void warn(const std::string& message) {
    if (detail::warnings_enabled()) std::cerr << "[torusflow] warning: " << message << "\n";
}
} // namespace torusflow

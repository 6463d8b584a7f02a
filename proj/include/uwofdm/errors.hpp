#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace uwofdm {

/// Bad argument to an in-process API call (size mismatch, out-of-range value).
class invalid_argument_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration is self-inconsistent or a config file cannot be parsed.
class invalid_config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for every failure that comes from the numbers rather than the inputs' shape.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class numerically_singular_error : public numerical_error {
public:
    numerically_singular_error(const std::string& what, double rcond)
        : numerical_error(what + " (reciprocal condition " + format(rcond) + ")"), rcond_(rcond) {}

    double rcond() const noexcept { return rcond_; }

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

    double rcond_;
};

/// The redundant-subcarrier block M22 cannot be inverted for the chosen indices.
class placement_infeasible_error : public numerically_singular_error {
public:
    using numerically_singular_error::numerically_singular_error;
};

/// An active carrier sits (almost) on a channel zero, so ZF is undefined.
class near_singular_channel_error : public numerical_error {
public:
    near_singular_channel_error(const std::string& what, int carrier, double magnitude)
        : numerical_error(what), carrier_(carrier), magnitude_(magnitude) {}

    int carrier() const noexcept { return carrier_; }
    double magnitude() const noexcept { return magnitude_; }

private:
    int carrier_;
    double magnitude_;
};

} // namespace uwofdm

#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace phi4 {

/** Invalid input or configuration. The command-line front end maps it to exit code 2. */
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/** Numerical breakdown such as non-convergence or a vanishing denominator. Exit code 1. */
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw config_error(message);
}

/** Compact scientific rendering for diagnostics. */
inline std::string format_number(double value)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.6g", value);
    return buffer;
}

} // namespace phi4

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedcorr {

// Invalid argument / precondition violation.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Geometry too degenerate for a neighborhood-based estimate.
struct DegenerateGeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss encountered during training.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration file / key validation failure. Message names the key path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b)
{
    return std::sqrt(squared_distance(a, b));
}

inline bool all_finite(std::span<const double> v)
{
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

// Round-trip-exact decimal form, used everywhere a double is serialized so
// that identical runs produce identical bytes.
inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace fedcorr

#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace ctsac {

// Error taxonomy; the CLI maps these onto exit codes (2/3/4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    while (a <= -kPi) a += kTwoPi;
    while (a > kPi) a -= kTwoPi;
    return a;
}

// Shortest round-trippable decimal form, used by every text format so that
// identical runs produce identical bytes.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace ctsac

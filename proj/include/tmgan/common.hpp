#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tmgan {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-facing configuration (CLI exit code 1, as opposed to runtime
// failures which map to exit code 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw Error(message);
}

template <typename T>
inline bool all_finite(const T* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(data[i]))) return false;
    return true;
}

// Shortest decimal text that round-trips the exact double.  Used everywhere a
// number is written to a file that must survive a parse/render cycle bitwise.
inline std::string format_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace tmgan

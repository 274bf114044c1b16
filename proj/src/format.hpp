#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace hrvnet::detail {

// Shortest round-trip decimal form, for deterministic CSV output.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace hrvnet::detail

#pragma once

// Byte-stable text helpers. All numbers that end up in CSV or JSON artifacts
// go through these so identical inputs always produce identical bytes
// (std::to_chars shortest round-trip form; no locale, no stream state).

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include "rlmt/errors.hpp"

namespace rlmt {

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError("not a number: '" + std::string(text) + "'");
    return v;
}

inline std::string format_int(long long v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Fixed one-decimal form with a trailing ".0" dropped: 500 -> "500",
// 414.23 -> "414.2". Used for human-facing summary cells.
inline std::string format_compact1(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 1);
    std::string out(buf, res.ptr);
    if (out.size() > 2 && out.compare(out.size() - 2, 2, ".0") == 0)
        out.erase(out.size() - 2);
    if (out == "-0") out = "0";
    return out;
}

}  // namespace rlmt

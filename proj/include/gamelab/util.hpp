#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "gamelab/errors.hpp"

namespace gamelab {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// ---- small numeric helpers ----

inline double mean(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return n ? s / static_cast<double>(n) : 0.0;
}

inline double mean(const std::vector<double>& v) { return mean(v.data(), v.size()); }

// Unbiased sample variance.
inline double variance(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(n - 1);
}

// Standard error of the sample mean.
inline double standard_error(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    return std::sqrt(variance(v) / static_cast<double>(n));
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal density.
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = (n == 1) ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

// Number of steps for covering [0, length] with requested step `dt_req`,
// rounding the count up so the adjusted step T/M never exceeds the request.
inline int steps_for(double length, double dt_req) {
    if (!(dt_req > 0.0) || !(length > 0.0)) fail(ErrorCode::nonpositive, "grid step and length must be positive");
    const double raw = length / dt_req;
    int m = static_cast<int>(std::ceil(raw - 1e-9));
    if (m < 1) m = 1;
    return m;
}

// ---- shortest round-trip decimal formatting (used by every writer) ----

inline std::string format_double(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long x) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// ---- FNV-1a 64-bit, used for artifact checksums in run metadata ----

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace gamelab

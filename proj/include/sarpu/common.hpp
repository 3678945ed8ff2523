#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace sarpu {

// Malformed or inconsistent input data (files, datasets).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure during optimization (non-finite or unbounded loss).
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clip(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// Shortest decimal that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent substream id for a (seed, a, b, ...) coordinate tuple.
inline std::uint64_t substream(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t substream(std::uint64_t seed, std::uint64_t head, Rest... rest) {
    return substream(splitmix64(seed ^ (head + 0x517cc1b727220a95ULL)), rest...);
}

inline std::mt19937_64 make_rng(std::uint64_t stream_id) {
    return std::mt19937_64(stream_id);
}

}  // namespace sarpu

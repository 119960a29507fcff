#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace configym {

// Small splitmix64-based generator. We roll our own instead of using
// <random> distributions because the bit stream must be identical across
// standard library implementations: episode logs and generated bundles are
// content-addressed and replayed byte-for-byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, n)
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller, no cached spare (keeps the stream
    // position a pure function of the number of calls)
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // derive an independent stream, e.g. one per experiment
    Rng fork(std::uint64_t salt) const {
        return Rng(state_ ^ (0xd1342543de82ef95ULL * (salt + 1)));
    }

private:
    std::uint64_t state_;
};

// FNV-1a, used for content-addressed log file names.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace configym

#pragma once

#include <cstdint>
#include <random>

namespace ivrepro::diagnostics::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform integers in [0, n) by rejection, independent of the standard
// library's distribution implementations.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (true) {
            const std::uint64_t x = engine_();
            if (x >= threshold) return x % n;
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ivrepro::diagnostics::detail

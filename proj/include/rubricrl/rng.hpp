#pragma once

#include <cstdint>
#include <string_view>

namespace rubricrl {

// splitmix64 keyed by (seed, step, stream tag). Independent streams let
// optional pipeline stages draw randomness without shifting the draws
// of unrelated stages.
struct Rng {
    std::uint64_t state = 0;

    static std::uint64_t fnv1a(std::string_view tag) {
        std::uint64_t h = 1469598103934665603ull;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

    static Rng stream(std::uint64_t seed, std::uint64_t step, std::string_view tag) {
        Rng rng;
        rng.state = seed ^ (step * 0x9e3779b97f4a7c15ull) ^ fnv1a(tag);
        rng.next();
        return rng;
    }

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double next_double() {  // [0,1)
        return double(next() >> 11) * 0x1.0p-53;
    }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    std::uint64_t next_below(std::uint64_t n) { return next() % n; }
};

}  // namespace rubricrl

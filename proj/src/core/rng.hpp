#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "core/common.hpp"

namespace egs {

// PCG32: small, fast, and bit-reproducible on every platform, which the
// determinism contracts require (std::normal_distribution is not portable).
class Rng {
public:
    explicit Rng(uint64_t seed = 0, uint64_t stream = 0) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    // Derives an independent child stream, e.g. rng.fork("clip", 17).
    Rng fork(const std::string& tag, uint64_t index = 0) const {
        uint64_t h = fnv1a64(tag);
        h = fnv1a64(&index, sizeof(index), h);
        uint64_t s = state_;
        h = fnv1a64(&s, sizeof(s), h);
        return Rng(h, h ^ 0x9e3779b97f4a7c15ull);
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1).
    double uniform() { return next_u32() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint32_t below(uint32_t n) { return static_cast<uint32_t>(uniform() * n); }

    // Box-Muller with a cached spare so the draw sequence is well defined.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-12) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 1;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace egs

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace nightseg {

// Deterministic RNG used everywhere in the project: xoshiro256** streams
// seeded through splitmix64. Substreams are derived from (seed, name,
// counters), so every consumer owns an independent stream and no global
// RNG state exists. Replaying a (seed, name, counters) triple replays the
// exact draw sequence.
class Rng {
public:
    Rng() : Rng(0) {}

    explicit Rng(uint64_t seed) {
        uint64_t x = seed + 0x9e3779b97f4a7c15ull;
        for (auto& w : state_) w = splitmix64(x);
    }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static uint64_t hash_name(std::string_view name) {
        uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        for (unsigned char c : name) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    // Named substream: independent of every other (name, a, b) combination.
    static Rng stream(uint64_t seed, std::string_view name, uint64_t a = 0, uint64_t b = 0) {
        uint64_t x = seed ^ 0x243f6a8885a308d3ull;
        x = splitmix64(x) ^ hash_name(name);
        x = splitmix64(x) ^ a;
        x = splitmix64(x) ^ b;
        Rng r;
        for (auto& w : r.state_) w = splitmix64(x);
        r.has_gauss_ = false;
        return r;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Unbiased integer in [0, n).
    uint64_t below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int range(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    double gauss() {
        if (has_gauss_) {
            has_gauss_ = false;
            return gauss_spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        gauss_spare_ = r * std::sin(a);
        has_gauss_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4] = {1, 2, 3, 4};
    bool has_gauss_ = false;
    double gauss_spare_ = 0.0;
};

}  // namespace nightseg

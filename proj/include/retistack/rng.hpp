#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

namespace retistack {

// All randomness in the library flows from a single root seed. Sub-seeds are
// derived with the counter scheme below instead of consuming a shared stream,
// so adding a consumer never shifts the draws of another one and the results
// are identical on every platform.

// Finalizer of splitmix64 (Steele et al.), used as the mixing function.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// derive_seed(root, {a, b, c}) == mix64(mix64(mix64(root ^ mix64(a)) ^ mix64(b)) ^ mix64(c)).
// Stream ids are small integers documented at the call site (fold index,
// epoch, replica counter, ...).
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = root;
    for (std::uint64_t id : ids) s = mix64(s ^ mix64(id));
    return s;
}

// xoshiro256++ with a splitmix64-seeded state. Self-contained on purpose:
// std::uniform_*_distribution is implementation-defined and would break the
// byte-identical reproducibility contract across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) {
            sm += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = sm;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, bound). Modulo bias is < 2^-32 for the bounds
    // used here (all far below 2^32) and keeps the draw portable.
    std::uint64_t below(std::uint64_t bound) { return bound ? next_u64() % bound : 0; }

    bool bernoulli(double p) { return next_double() < p; }

    // Marsaglia polar method; consumes a variable number of uniforms but is
    // deterministic for a given seed.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace retistack

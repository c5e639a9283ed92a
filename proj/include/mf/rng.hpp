#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mf/matrix.hpp"

namespace mf {

/// Deterministic RNG. mt19937_64 provides the bit stream; all value
/// transforms are spelled out here instead of relying on <random>
/// distributions, whose output differs between standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed), seed_mix_(seed) {}

    /// Derives an independent stream, e.g. Rng(seed).fork(epoch).
    Rng fork(uint64_t stream) const {
        uint64_t h = seed_mix_ ^ (0x9e3779b97f4a7c15ull + stream);
        h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ull;
        h ^= h >> 27; h *= 0x94d049bb133111ebull;
        h ^= h >> 31;
        return Rng(h, 0);
    }

    uint64_t bits() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const int span = hi - lo + 1;
        int v = lo + static_cast<int>(uniform() * span);
        return v > hi ? hi : v;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Matrix uniform_matrix(int rows, int cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (auto& v : m.vec()) v = uniform(lo, hi);
        return m;
    }

    Matrix normal_matrix(int rows, int cols, double stddev = 1.0) {
        Matrix m(rows, cols);
        for (auto& v : m.vec()) v = normal() * stddev;
        return m;
    }

private:
    Rng(uint64_t mixed, int) : eng_(mixed), seed_mix_(mixed) {}

    std::mt19937_64 eng_;
    uint64_t seed_mix_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace mf

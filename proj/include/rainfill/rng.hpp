#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace rainfill {

/// Derives a well-mixed child seed (splitmix64 finalizer).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seeded 64-bit Mersenne Twister with the draws the pipeline needs.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on the closed range [lo, hi].
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
    }
    bool bernoulli(double p) { return uniform() < p; }
    void fill_normal(std::span<double> out) {
        for (auto& v : out) v = normal();
    }
    /// Seed for an independent child stream.
    uint64_t split() { return engine_(); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace rainfill

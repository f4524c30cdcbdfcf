#pragma once

#include <cstdint>
#include <vector>

namespace maka {

// SplitMix64. All seeded sampling in the project goes through this generator
// so that splits and synthetic datasets are reproducible bit-for-bit across
// platforms and standard-library versions (std:: distributions are not
// portable). Reference sequence: Steele, Lea & Flood's splittable generator.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t next_below(std::uint64_t n);

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Approximate standard normal as (sum of 12 uniforms) - 6. Avoids libm
    // transcendentals so synthetic fixtures reproduce bitwise everywhere.
    double next_gaussian() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += next_double();
        return s - 6.0;
    }

    // Derive an independent stream seed (for per-split sub-generators).
    std::uint64_t derive_seed() { return next_u64(); }

private:
    std::uint64_t state_;
};

// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        if (i != j) std::swap(items[i], items[j]);
    }
}

// k distinct indices drawn uniformly from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, SplitMix64& rng);

}  // namespace maka

#include "maka/rng.hpp"

#include "maka/error.hpp"

namespace maka {

std::uint64_t SplitMix64::next_below(std::uint64_t n) {
    if (n == 0) fail("BadParams", "next_below: n must be positive");
    if ((n & (n - 1)) == 0) return next_u64() & (n - 1);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, SplitMix64& rng) {
    if (k > n) fail("BadParams", "sample_without_replacement: k exceeds population size");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // partial Fisher-Yates: first k slots are the sample
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace maka

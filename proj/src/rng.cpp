#include "ills/rng.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace ills {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream) noexcept {
    return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream));
}

std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
    if (bound == 0) {
        throw std::invalid_argument("uniform_below: empty range");
    }
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = gen();
    while (draw >= limit) {
        draw = gen();
    }
    return draw % bound;
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::uint64_t seed) {
    if (count > population) {
        throw std::invalid_argument("sample_without_replacement: count exceeds population");
    }
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::mt19937_64 gen(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(gen, population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace ills

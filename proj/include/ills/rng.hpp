#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ills {

// Substreams forked from one experiment seed. Changing how many draws one
// stage makes never perturbs another stage.
enum class Stream : std::uint64_t {
    Split = 1,
    Mask = 2,
    Subsample = 3,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

std::uint64_t derive_seed(std::uint64_t seed, Stream stream) noexcept;

// Uniform integer in [0, bound) by rejection. std::uniform_int_distribution is
// implementation-defined, which would break cross-platform reproducibility.
std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound);

// First `count` entries of a seeded Fisher-Yates shuffle of [0, population).
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::uint64_t seed);

}  // namespace ills

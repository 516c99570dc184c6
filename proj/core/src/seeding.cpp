#include "pplprompt/seeding.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace pplprompt {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (key + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("SeededRng::below: bound must be positive");
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % bound;
}

std::vector<std::size_t> SeededRng::sample_indices(std::size_t population, std::size_t count) {
    if (count > population) throw std::invalid_argument("SeededRng::sample_indices: count exceeds population");
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // Partial Fisher-Yates from the front.
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(below(population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace pplprompt

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace pplprompt {

/// splitmix64 finalizer; derives independent stream seeds from (seed, key).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) noexcept;

/// Portable seeded generator. std::mt19937_64's output sequence is fixed by the
/// standard but the std distributions are not, so bounded draws and shuffles
/// are done here to keep results identical across standard libraries.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}
    SeededRng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// `count` distinct indices from [0, population), in draw order.
    std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count);

private:
    std::mt19937_64 engine_;
};

}  // namespace pplprompt

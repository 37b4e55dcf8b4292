#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fairtext {

// Deterministic randomness. mt19937_64 is fully specified by the standard;
// the bounded draw and shuffle below are our own so results do not depend on
// the standard library's unspecified distribution algorithms.

std::uint64_t splitmix64(std::uint64_t x);

// Independent substream seed for (base seed, purpose tag).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

class DetRng {
  public:
    explicit DetRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, bound), bound >= 1. Rejection sampling, no modulo bias.
    std::uint64_t bounded(std::uint64_t bound);

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // First k positions of a Fisher-Yates pass over [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[bounded(i)]);
        }
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace fairtext

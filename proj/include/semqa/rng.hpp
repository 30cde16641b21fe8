#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace semqa {

/// Deterministic random source. mt19937_64 output is pinned by the standard,
/// and all derived draws below avoid std::uniform_*_distribution / std::shuffle,
/// whose algorithms are implementation-defined. Equal seeds therefore produce
/// equal streams on every platform and compiler.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Uniform integer in [0, n). n must be > 0. Modulo bias is irrelevant
    /// at the n we use and keeps the mapping fully specified.
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    bool chance(double p) { return unit() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates, fixed draw order.
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(below(v.size()))];
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace semqa

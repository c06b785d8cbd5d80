#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace qexpr {

/// Counter-based generator: the n-th output of a stream is a pure function
/// of (key, n), so any (seed, circuit, pair, shot) tuple maps to its own
/// reproducible substream regardless of scheduling.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept : key_(mix(seed)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        return mix(key_ + kGamma * ++counter_);
    }

    /// Independent child stream keyed by this stream's key and `ids`.
    [[nodiscard]] Rng derive(std::initializer_list<std::uint64_t> ids) const noexcept {
        std::uint64_t k = key_;
        for (auto id : ids) {
            k = mix(k ^ mix(id + kGamma));
        }
        Rng child;
        child.key_ = k;
        return child;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = max() - max() % n;
        for (;;) {
            const std::uint64_t x = (*this)();
            if (x < limit) {
                return x % n;
            }
        }
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace qexpr

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace otc {

// Deterministic random stream. Same seed gives bit-identical draws; the
// gaussian/index transforms are implemented here rather than via
// std::*_distribution so the sequence does not depend on libstdc++ internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Standard normal via Box-Muller (pairs cached).
    double gaussian();

    // Uniform integer in [0, n); n must be positive.
    std::size_t index(std::size_t n);

    // Named child stream, derived from the base seed only. Stage-level
    // reproducibility is independent of how many draws the parent made.
    Rng substream(std::string_view label) const;

    std::uint64_t seed() const { return seed_; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace otc

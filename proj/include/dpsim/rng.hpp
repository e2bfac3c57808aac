#pragma once

#include <random>

#include "dpsim/common.hpp"

namespace dpsim {

/// Per-worker random stream. Each block/channel owns its own instance,
/// seeded deterministically; streams are never shared between workers.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    std::mt19937_64& engine() { return gen_; }

    double uniform() { return uni_(gen_); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
    }

    double gaussian() { return normal_(gen_); }

    /// Circularly symmetric complex Gaussian with E|w|^2 = variance.
    cplx complex_gaussian(double variance) {
        const double s = std::sqrt(variance / 2.0);
        return {s * normal_(gen_), s * normal_(gen_)};
    }

    bool bit() { return (gen_() & 1u) != 0; }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

}  // namespace dpsim

#pragma once

#include "rpsft/matrix.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace rpsft {

/// Seeded generator whose output is identical across platforms and standard
/// libraries: mt19937_64 for the bit stream, hand-rolled uniform and Box-Muller
/// transforms on top (std distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    DenseMatrix gaussian(std::size_t rows, std::size_t cols, double scale = 1.0);
    std::vector<double> gaussian_vector(std::size_t n, double scale = 1.0);
    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    /// Derives an independent stream for sub-task `tag` of this seed.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace rpsft

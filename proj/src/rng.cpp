#include "rpsft/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace rpsft {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

DenseMatrix Rng::gaussian(std::size_t rows, std::size_t cols, double scale) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) {
        v = scale * normal();
    }
    return m;
}

std::vector<double> Rng::gaussian_vector(std::size_t n, double scale) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = scale * normal();
    }
    return v;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        std::swap(p[i - 1], p[below(i)]);
    }
    return p;
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t tag) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace rpsft

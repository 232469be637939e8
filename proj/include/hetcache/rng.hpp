#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hetcache {

// Seeded Gaussian source. mt19937_64 output is pinned by the standard and the
// Box-Muller transform avoids std::normal_distribution, whose draw sequence
// is implementation-defined.
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        // in (0, 1]
        return (static_cast<double>(engine_()) + 1.0) * 0x1.0p-64;
    }

    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    float gaussianf() { return static_cast<float>(gaussian()); }

    std::vector<float> gaussian_vector(std::size_t n, float scale = 1.0f) {
        std::vector<float> out(n);
        for (auto& v : out) v = scale * gaussianf();
        return out;
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace hetcache

#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace lyapcert {

/// Deterministic 64-bit generator (splitmix64). Produces the same stream on
/// every platform for a given seed, which keeps sampled reports reproducible
/// byte for byte. std::uniform_real_distribution is implementation-defined,
/// so it is not used anywhere in the library.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller.
    double gaussian() {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Uniform direction times uniform-in-ball radius, dimension d.
    std::vector<double> in_ball(int d, double radius) {
        std::vector<double> v(static_cast<std::size_t>(d));
        double nrm2 = 0.0;
        for (auto& c : v) {
            c = gaussian();
            nrm2 += c * c;
        }
        const double nrm = std::sqrt(nrm2);
        const double r = radius * std::pow(next_double(), 1.0 / d);
        if (nrm > 0.0) {
            for (auto& c : v) c *= r / nrm;
        }
        return v;
    }

private:
    std::uint64_t state_;
};

}  // namespace lyapcert

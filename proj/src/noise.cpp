#include "satlink/noise.hpp"

#include <cmath>

namespace satlink {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    std::uint64_t z = master ^ (tag * 0x9E3779B97F4A7C15ULL);
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void SeededRng::gaussian_pair(double& a, double& b) {
    // u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    a = r * std::cos(kTwoPi * u2);
    b = r * std::sin(kTwoPi * u2);
}

double SeededRng::gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double a, b;
    gaussian_pair(a, b);
    cached_ = b;
    has_cached_ = true;
    return a;
}

}  // namespace satlink

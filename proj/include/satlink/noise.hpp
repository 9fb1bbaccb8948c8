// Deterministic random sources. Every random quantity in the simulator flows
// from an explicit 64-bit seed; mt19937_64 output is fixed by the standard and
// the Gaussian transform is spelled out here, so runs are reproducible.
#pragma once

#include <cstdint>
#include <random>

#include "satlink/types.hpp"

namespace satlink {

struct NoiseSpec {
    double variance = 0.0;  // E|z|^2 per complex sample
    std::uint64_t seed = 0;
};

/// Derive an independent substream seed from a master seed and a stream tag
/// (splitmix64 of the xor; good enough to decorrelate mt19937_64 seedings).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag);

/// Seeded uniform/Gaussian scalar source.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t bits() { return rng_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; second value of each pair is cached.
    double gaussian();

    /// Independent standard normal pair (one Box-Muller transform).
    void gaussian_pair(double& a, double& b);

  private:
    std::mt19937_64 rng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Complex AWGN stream: independent real/imag parts with variance sigma^2/2
/// each, so E|z|^2 equals NoiseSpec::variance.
class GaussianSource {
  public:
    explicit GaussianSource(NoiseSpec spec)
        : rng_(spec.seed), scale_(std::sqrt(spec.variance / 2.0)) {}

    Complex next() {
        double a, b;
        rng_.gaussian_pair(a, b);
        return {scale_ * a, scale_ * b};
    }

    SymbolBlock block(std::size_t count) {
        SymbolBlock out(count);
        for (auto& z : out) z = next();
        return out;
    }

  private:
    SeededRng rng_;
    double scale_;
};

/// The spec-level stream operation: `count` seeded complex Gaussian samples.
inline SymbolBlock seeded_gaussian_stream(NoiseSpec spec, std::size_t count) {
    return GaussianSource(spec).block(count);
}

}  // namespace satlink

// Shared baseband types for the 2x2 precoded satellite forward-link simulator.
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace satlink {

using Complex = std::complex<double>;
using SymbolBlock = std::vector<Complex>;

// Beams == terminals throughout (2x2 MU-MISO); kept as one constant so the
// dimensionality is explicit at every use site.
inline constexpr int kNumBeams = 2;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Wrap an angle to (-pi, pi].
inline double wrap_phase(double rad) {
    while (rad > kPi) rad -= kTwoPi;
    while (rad <= -kPi) rad += kTwoPi;
    return rad;
}

inline double db_to_linear_power(double db) { return std::pow(10.0, db / 10.0); }
inline double db_to_linear_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double linear_power_to_db(double p) { return 10.0 * std::log10(p); }

}  // namespace satlink

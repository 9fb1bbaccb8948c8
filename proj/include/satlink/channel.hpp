// Satellite segment emulation: two independent transponder chains with
// undisciplined LOs, slow link-gain drift, and the terminal-side
// dual-polarization digital mixing that creates the FFR interference scenario.
#pragma once

#include <array>
#include <cstdint>

#include "satlink/mat2.hpp"
#include "satlink/noise.hpp"
#include "satlink/types.hpp"

namespace satlink {

struct TransponderState {
    double lo_frequency_offset_hz = 0.0;
    double lo_phase_rad = 0.0;     // wrapped to (-pi, pi], advanced per symbol
    double phase_noise_rate = 0.0;  // Wiener intensity, rad^2/s
    Complex gain{1.0, 0.0};
    std::uint64_t seed = 0;

    // Runtime state carried across blocks.
    std::uint64_t elapsed_symbols = 0;
    double last_block_mid_phase = 0.0;  // LO phase at the midpoint of the last block
    SeededRng walk{0};
    bool walk_seeded = false;
};

/// y[t] = gain * x[t] * exp(i * theta[t]) where theta advances by the constant
/// LO ramp plus a seeded Wiener increment per symbol; state is advanced to the
/// end of the block.
SymbolBlock transponder_pass(const SymbolBlock& x, TransponderState& state, double symbol_rate);

struct MixingConfig {
    double alpha = 0.5;  // V-pol power ratio
    double beta = 0.5;   // H-pol power ratio
};

/// y = sqrt(alpha) (y_v + n_v) + sqrt(beta) (y_h + n_h) with independent noise
/// of the sources' variance on each polarization chain. Throws LengthMismatch.
SymbolBlock mix_polarizations(const SymbolBlock& y_v, const SymbolBlock& y_h,
                              const MixingConfig& cfg, GaussianSource& noise_v,
                              GaussianSource& noise_h);

struct LinkGeometry {
    // gain[terminal][beam], complex amplitude.
    std::array<std::array<Complex, 2>, 2> gain{{{Complex{1.0}, Complex{0.0}},
                                                {Complex{0.0}, Complex{1.0}}}};
    double amp_drift_db_per_hour = 0.0;  // random-walk std of |h| per sqrt(hour), in dB
};

/// One forward-link hop: per-beam transponder chains, link gains with slow
/// amplitude drift, then per-terminal polarization mixing with AWGN.
class ChannelEmulator {
  public:
    ChannelEmulator(const LinkGeometry& geometry, std::array<TransponderState, 2> transponders,
                    std::array<MixingConfig, 2> mixing, std::array<double, 2> noise_variance,
                    double symbol_rate, std::uint64_t seed);

    /// Pass one per-beam block pair through the link; returns the per-terminal
    /// received blocks. Both inputs must have equal length.
    std::array<SymbolBlock, 2> process(const std::array<SymbolBlock, 2>& tx);

    /// Effective end-to-end channel seen at the terminals for the last
    /// processed block: sqrt(ratio) * drifted gain * transponder gain *
    /// rotation at block midpoint. Row = terminal, column = beam.
    Mat2 effective_channel() const;

    const TransponderState& transponder(int beam) const { return transponders_[beam]; }

  private:
    LinkGeometry geometry_;
    std::array<TransponderState, 2> transponders_;
    std::array<MixingConfig, 2> mixing_;
    std::array<double, 2> noise_variance_;
    double symbol_rate_;
    std::array<std::array<double, 2>, 2> drift_db_{};  // accumulated |h| drift
    std::array<std::array<GaussianSource, 2>, 2> noise_;
    SeededRng drift_rng_;
};

}  // namespace satlink

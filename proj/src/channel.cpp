#include "satlink/channel.hpp"

#include <cmath>

#include "satlink/errors.hpp"

namespace satlink {

SymbolBlock transponder_pass(const SymbolBlock& x, TransponderState& state, double symbol_rate) {
    if (symbol_rate <= 0.0) throw Error("transponder_pass: symbol rate must be > 0");
    if (!state.walk_seeded) {
        state.walk = SeededRng(state.seed);
        state.walk_seeded = true;
    }
    const double t_symbol = 1.0 / symbol_rate;
    const double ramp = kTwoPi * state.lo_frequency_offset_hz * t_symbol;
    const double walk_std = std::sqrt(state.phase_noise_rate * t_symbol);

    SymbolBlock y(x.size());
    double phase = state.lo_phase_rad;
    const std::size_t mid = x.size() / 2;
    for (std::size_t t = 0; t < x.size(); ++t) {
        phase += ramp;
        if (walk_std > 0.0) phase += walk_std * state.walk.gaussian();
        phase = wrap_phase(phase);
        if (t == mid) state.last_block_mid_phase = phase;
        y[t] = state.gain * x[t] * std::polar(1.0, phase);
    }
    state.lo_phase_rad = phase;
    state.elapsed_symbols += x.size();
    return y;
}

SymbolBlock mix_polarizations(const SymbolBlock& y_v, const SymbolBlock& y_h,
                              const MixingConfig& cfg, GaussianSource& noise_v,
                              GaussianSource& noise_h) {
    if (y_v.size() != y_h.size()) throw LengthMismatch("mix_polarizations: block lengths differ");
    const double sa = std::sqrt(cfg.alpha);
    const double sb = std::sqrt(cfg.beta);
    SymbolBlock out(y_v.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        out[t] = sa * (y_v[t] + noise_v.next()) + sb * (y_h[t] + noise_h.next());
    }
    return out;
}

ChannelEmulator::ChannelEmulator(const LinkGeometry& geometry,
                                 std::array<TransponderState, 2> transponders,
                                 std::array<MixingConfig, 2> mixing,
                                 std::array<double, 2> noise_variance, double symbol_rate,
                                 std::uint64_t seed)
    : geometry_(geometry),
      transponders_(std::move(transponders)),
      mixing_(mixing),
      noise_variance_(noise_variance),
      symbol_rate_(symbol_rate),
      noise_{{{GaussianSource({noise_variance[0], derive_seed(seed, 1)}),
               GaussianSource({noise_variance[0], derive_seed(seed, 2)})},
              {GaussianSource({noise_variance[1], derive_seed(seed, 3)}),
               GaussianSource({noise_variance[1], derive_seed(seed, 4)})}}},
      drift_rng_(derive_seed(seed, 5)) {
    for (int b = 0; b < 2; ++b) {
        if (!transponders_[b].walk_seeded) {
            transponders_[b].walk = SeededRng(transponders_[b].seed);
            transponders_[b].walk_seeded = true;
        }
    }
}

std::array<SymbolBlock, 2> ChannelEmulator::process(const std::array<SymbolBlock, 2>& tx) {
    if (tx[0].size() != tx[1].size()) throw LengthMismatch("forward_link: beam block lengths differ");

    std::array<SymbolBlock, 2> relayed;
    for (int b = 0; b < 2; ++b) {
        relayed[b] = transponder_pass(tx[b], transponders_[b], symbol_rate_);
    }

    // Slow |h| drift advances once per block.
    if (geometry_.amp_drift_db_per_hour > 0.0) {
        const double hours = static_cast<double>(tx[0].size()) / symbol_rate_ / 3600.0;
        const double step = geometry_.amp_drift_db_per_hour * std::sqrt(hours);
        for (int u = 0; u < 2; ++u) {
            for (int b = 0; b < 2; ++b) drift_db_[u][b] += step * drift_rng_.gaussian();
        }
    }

    std::array<SymbolBlock, 2> rx;
    SymbolBlock scaled_v(tx[0].size());
    SymbolBlock scaled_h(tx[0].size());
    for (int u = 0; u < 2; ++u) {
        const Complex gv = geometry_.gain[u][0] * db_to_linear_amplitude(drift_db_[u][0]);
        const Complex gh = geometry_.gain[u][1] * db_to_linear_amplitude(drift_db_[u][1]);
        for (std::size_t t = 0; t < relayed[0].size(); ++t) {
            scaled_v[t] = gv * relayed[0][t];
            scaled_h[t] = gh * relayed[1][t];
        }
        rx[u] = mix_polarizations(scaled_v, scaled_h, mixing_[u], noise_[u][0], noise_[u][1]);
    }
    return rx;
}

Mat2 ChannelEmulator::effective_channel() const {
    Mat2 h;
    for (int u = 0; u < 2; ++u) {
        const double ratio[2] = {mixing_[u].alpha, mixing_[u].beta};
        for (int b = 0; b < 2; ++b) {
            h.at(u, b) = std::sqrt(ratio[b]) * geometry_.gain[u][b] *
                         db_to_linear_amplitude(drift_db_[u][b]) * transponders_[b].gain *
                         std::polar(1.0, transponders_[b].last_block_mid_phase);
        }
    }
    return h;
}

}  // namespace satlink

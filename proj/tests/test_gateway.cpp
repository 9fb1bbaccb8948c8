#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "satlink/errors.hpp"
#include "satlink/gateway.hpp"
#include "support/oracles.hpp"

using namespace satlink;

namespace {

DifferentialEstimate measurement(double f_hz, double phase_rad) {
    DifferentialEstimate d;
    d.frequency_hz = f_hz;
    d.epsilon = 0.0;
    d.phase_rad = phase_rad;
    return d;
}

CompensationState enabled_state() {
    CompensationState s;
    s.enabled = true;
    return s;
}

CsiReport report_for(int terminal, Complex csi0, Complex csi1, std::uint64_t t_symbol,
                     double sigma2 = 0.01) {
    CsiReport r;
    r.terminal_id = terminal;
    r.estimate.csi = {csi0, csi1};
    r.estimate.pilot_index = 1;
    r.estimate.timestamp = t_symbol;
    r.estimate.noise_variance = sigma2;
    return r;
}

Gateway::Options small_opts() {
    Gateway::Options o;
    o.symbol_rate = 1e6;
    return o;
}

}  // namespace

TEST_CASE("compensation update: zero residual leaves the state unchanged") {
    CompensationState s = enabled_state();
    s.nco_frequency_hz = 12.0;
    s.nco_phase_rad = 0.4;
    update_compensation(s, measurement(0.0, 0.0));
    CHECK(s.nco_frequency_hz == 12.0);
    CHECK(s.nco_phase_rad == 0.4);
}

TEST_CASE("compensation loop: 50 Hz differential falls below 1 Hz in 20 intervals") {
    CompensationState s = enabled_state();
    const double injected = 50.0;
    double residual = injected;
    for (int k = 0; k < 20; ++k) {
        residual = injected - s.nco_frequency_hz;
        update_compensation(s, measurement(residual, 0.0));
    }
    CHECK(std::abs(injected - s.nco_frequency_hz) < 1.0);
}

TEST_CASE("compensation loop: 90 degree phase step settles below 20 degrees") {
    CompensationState s = enabled_state();
    const double step = kPi / 2;
    double residual = step;
    for (int k = 0; k < 8; ++k) {
        residual = wrap_phase(step - s.nco_phase_rad);
        update_compensation(s, measurement(0.0, residual));
    }
    residual = wrap_phase(step - s.nco_phase_rad);
    CHECK(std::abs(residual) < 20.0 * kPi / 180.0);
}

TEST_CASE("compensation loop: stable up to 200 Hz and over 1e4 intervals") {
    for (double injected : {-200.0, -60.0, 60.0, 200.0}) {
        CompensationState s = enabled_state();
        int settled_at = -1;
        for (int k = 0; k < 10000; ++k) {
            const double residual = injected - s.nco_frequency_hz;
            if (std::abs(residual) < 1.0 && settled_at < 0) settled_at = k;
            update_compensation(s, measurement(residual, 0.0));
            CHECK(std::abs(residual) <= std::abs(injected) + 1e-9);  // no divergence
        }
        CHECK(settled_at >= 0);
        CHECK(settled_at <= 25);
        CHECK(std::abs(injected - s.nco_frequency_hz) < 1e-6);
    }
}

TEST_CASE("apply_compensation: disabled is the identity") {
    CompensationState s;
    const SymbolBlock x = make_sosf(128, 1);
    const SymbolBlock y = apply_compensation(x, s, 1e6);
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(Complex)) == 0);
}

TEST_CASE("apply_compensation: exact inverse of the matching rotation") {
    const double rate = 1e6;
    const double f = 85.0, phase = 0.7;
    const SymbolBlock x = make_sosf(4096, 2);
    SymbolBlock rotated(x.size());
    double ramp = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        ramp += kTwoPi * f / rate;
        rotated[t] = x[t] * std::polar(1.0, ramp + phase);
    }
    CompensationState s = enabled_state();
    s.nco_frequency_hz = f;
    s.nco_phase_rad = phase;
    const SymbolBlock y = apply_compensation(rotated, s, rate);
    for (std::size_t t = 0; t < x.size(); ++t) CHECK(std::abs(y[t] - x[t]) < 1e-12);
}

TEST_CASE("apply_compensation: phase ramp slope equals -2 pi f T") {
    CompensationState s = enabled_state();
    s.nco_frequency_hz = 40.0;
    const double rate = 1e6;
    const SymbolBlock y = apply_compensation(SymbolBlock(2000, Complex{1.0, 0.0}), s, rate);
    // least-squares slope of the unwrapped phase
    double num = 0.0, den = 0.0;
    const double mean_t = (2000.0 - 1.0) / 2.0;
    double unwrapped = std::arg(y[0]);
    double prev = unwrapped;
    double mean_p = 0.0;
    std::vector<double> ph(2000);
    for (std::size_t t = 0; t < y.size(); ++t) {
        double a = std::arg(y[t]);
        if (t > 0) unwrapped += wrap_phase(a - prev);
        prev = a;
        ph[t] = unwrapped;
        mean_p += unwrapped;
    }
    mean_p /= 2000.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        num += (t - mean_t) * (ph[t] - mean_p);
        den += (t - mean_t) * (t - mean_t);
    }
    CHECK(num / den == doctest::Approx(-kTwoPi * 40.0 / rate).epsilon(1e-9));
}

TEST_CASE("select_precoder: identity modes") {
    const PrecodingMatrix u = select_precoder(PrecoderMode::Unprecoded, Mat2::identity(), 0.1, {});
    CHECK(max_abs_diff(u.w, Mat2::identity()) == 0.0);
    CHECK(u.normalized);

    const PrecodingMatrix m = select_precoder(PrecoderMode::MMSE, Mat2::identity(), 0.0, {});
    CHECK(max_abs_diff(m.w, Mat2::identity()) < 1e-12);
}

TEST_CASE("select_precoder: noiseless MMSE cancels interference") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto ho = oracles::random_well_conditioned_channel(rng);
        const Mat2 h{{ho[0], ho[1], ho[2], ho[3]}};
        // the zero-forcing direction: leakage through the true channel before
        // envelope normalization is numerically zero
        const Mat2 g = h * compute_mmse(h, 0.0).w;
        CHECK(std::abs(g.at(0, 1)) / std::abs(g.at(0, 0)) < 1e-9);
        CHECK(std::abs(g.at(1, 0)) / std::abs(g.at(1, 1)) < 1e-9);
    }
    // with equal row norms the normalized precoder keeps the null exactly
    std::uniform_real_distribution<double> u(0.0, 2 * kPi);
    for (int trial = 0; trial < 100; ++trial) {
        const Complex c = std::polar(0.5, u(rng));
        const Mat2 h{{Complex(1.0), c, std::conj(c), Complex(1.0)}};
        const PrecodingMatrix w = select_precoder(PrecoderMode::MMSE, h, 0.0, {});
        const Mat2 g = h * w.w;
        const double leak = std::max(std::abs(g.at(0, 1)) / std::abs(g.at(0, 0)),
                                     std::abs(g.at(1, 0)) / std::abs(g.at(1, 1)));
        CHECK(20.0 * std::log10(leak + 1e-300) < -30.0);
    }
}

TEST_CASE("assemble_channel: rows from reports, staleness contract") {
    const SuperframeLayout layout;
    Gateway gw(layout, build_pilot_set(2), make_beam_sequences(layout), small_opts());

    CHECK_THROWS_AS((void)gw.assemble_channel(0.0), StaleCsi);

    gw.deliver_report(report_for(0, {1.0, 0.0}, {0.0, 0.0}, 1000, 0.02));
    gw.deliver_report(report_for(1, {0.0, 0.0}, {1.0, 0.0}, 1000, 0.04));
    const AssembledChannel ch = gw.assemble_channel(0.01);
    CHECK(max_abs_diff(ch.h, Mat2::identity()) == 0.0);
    CHECK(ch.sigma2 == doctest::Approx(0.03));
    CHECK(ch.age_s == doctest::Approx(0.01 - 0.001));

    CHECK_THROWS_AS((void)gw.assemble_channel(5.0), StaleCsi);
}

TEST_CASE("gateway noise average uses a rolling window of reports") {
    const SuperframeLayout layout;
    Gateway::Options opts = small_opts();
    opts.noise_report_window = 2;
    Gateway gw(layout, build_pilot_set(2), make_beam_sequences(layout), opts);
    gw.deliver_report(report_for(0, {1, 0}, {0, 0}, 100, 0.10));
    gw.deliver_report(report_for(0, {1, 0}, {0, 0}, 200, 0.20));
    gw.deliver_report(report_for(0, {1, 0}, {0, 0}, 300, 0.40));  // 0.10 falls out
    gw.deliver_report(report_for(1, {0, 0}, {1, 0}, 300, 0.0));
    const AssembledChannel ch = gw.assemble_channel(0.001);
    CHECK(ch.sigma2 == doctest::Approx(0.5 * (0.3 + 0.0)));
}

TEST_CASE("transmit: unprecoded output equals the raw superframes") {
    SuperframeLayout layout;
    layout.frames_per_superframe = 1;
    const PilotSet set = build_pilot_set(2);
    const BeamSequences seq = make_beam_sequences(layout);
    Gateway::Options opts = small_opts();
    Gateway gw(layout, set, seq, opts);

    const auto tx = gw.transmit_superframe(0);

    // reconstruct the expected superframe from the same payload stream
    std::array<SeededRng, 2> rng{SeededRng(derive_seed(opts.payload_seed, 100)),
                                 SeededRng(derive_seed(opts.payload_seed, 101))};
    std::array<std::vector<std::uint8_t>, 2> payload;
    for (int b = 0; b < 2; ++b) {
        payload[b].resize(static_cast<std::size_t>(layout.data_frame_length) * 2);
        for (auto& bit : payload[b]) bit = static_cast<std::uint8_t>(rng[b].bits() & 1);
    }
    const Superframe sf = build_superframe(layout, set, seq, payload);
    for (int b = 0; b < 2; ++b) {
        REQUIRE(tx[b].size() == sf.beams[b].size());
        CHECK(std::memcmp(tx[b].data(), sf.beams[b].data(), tx[b].size() * sizeof(Complex)) == 0);
    }
}

TEST_CASE("transmit: pilots identical across modes, data differs by exactly W") {
    SuperframeLayout layout;
    layout.frames_per_superframe = 1;
    const PilotSet set = build_pilot_set(2);
    const BeamSequences seq = make_beam_sequences(layout);

    auto make_gateway = [&](PrecoderMode mode) {
        Gateway gw(layout, set, seq, small_opts());
        gw.set_mode(mode);
        gw.deliver_report(report_for(0, {0.9, 0.1}, {0.3, 0.0}, 0, 0.05));
        gw.deliver_report(report_for(1, {0.2, -0.1}, {1.1, 0.0}, 0, 0.05));
        return gw;
    };

    Gateway unprec = make_gateway(PrecoderMode::Unprecoded);
    Gateway mmse = make_gateway(PrecoderMode::MMSE);
    Gateway pac = make_gateway(PrecoderMode::MMSE_PAC);
    const auto tx_u = unprec.transmit_superframe(0);
    const auto tx_m = mmse.transmit_superframe(0);
    const auto tx_p = pac.transmit_superframe(0);

    const auto segments = superframe_segment_map(layout);
    for (const Segment& s : segments) {
        for (std::size_t t = s.offset; t < s.offset + s.length; ++t) {
            if (!s.precoded) {
                CHECK(tx_m[0][t] == tx_u[0][t]);
                CHECK(tx_m[1][t] == tx_u[1][t]);
                CHECK(tx_p[0][t] == tx_u[0][t]);
                CHECK(tx_p[1][t] == tx_u[1][t]);
            } else {
                // precoded segments are exactly W * (unprecoded pair)
                const Mat2 w = mmse.log().back().w;
                const auto expect = w * std::array<Complex, 2>{tx_u[0][t], tx_u[1][t]};
                CHECK(std::abs(tx_m[0][t] - expect[0]) == 0.0);
                CHECK(std::abs(tx_m[1][t] - expect[1]) == 0.0);
            }
        }
    }
}

TEST_CASE("transmit: stale CSI keeps the last precoder and the stream flowing") {
    SuperframeLayout layout;
    layout.frames_per_superframe = 1;
    Gateway::Options opts = small_opts();
    opts.staleness_s = 0.004;  // ~2 superframes at 1 Msym/s
    Gateway gw(layout, build_pilot_set(2), make_beam_sequences(layout), opts);
    gw.set_mode(PrecoderMode::MMSE);
    gw.deliver_report(report_for(0, {1.0, 0.0}, {0.25, 0.0}, 0, 0.05));
    gw.deliver_report(report_for(1, {0.25, 0.0}, {1.0, 0.0}, 0, 0.05));

    const std::uint64_t sf_len = layout.total_length();
    (void)gw.transmit_superframe(0);
    const Mat2 fresh = gw.log().back().w;
    CHECK(gw.log().back().csi_age_s >= 0.0);

    // far beyond staleness: precoder held, output length unchanged
    const auto tx = gw.transmit_superframe(sf_len * 40);
    CHECK(tx[0].size() == sf_len);
    CHECK(max_abs_diff(gw.log().back().w, fresh) == 0.0);
    CHECK(gw.log().back().csi_age_s == -1.0);
}

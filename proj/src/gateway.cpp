#include "satlink/gateway.hpp"

#include <algorithm>
#include <cmath>

#include "satlink/errors.hpp"

namespace satlink {

const char* precoder_mode_name(PrecoderMode m) {
    switch (m) {
        case PrecoderMode::Unprecoded: return "unprecoded";
        case PrecoderMode::MMSE: return "mmse";
        case PrecoderMode::MMSE_PAC: return "mmse_pac";
    }
    return "?";
}

void update_compensation(CompensationState& state, const DifferentialEstimate& d) {
    if (!state.enabled) return;
    state.nco_frequency_hz += state.k_f * d.frequency_hz;
    state.nco_frequency_hz =
        std::clamp(state.nco_frequency_hz, -state.max_frequency_hz, state.max_frequency_hz);
    state.nco_phase_rad = wrap_phase(state.nco_phase_rad + state.k_p * d.phase_rad);
}

SymbolBlock apply_compensation(const SymbolBlock& tx_beam1, CompensationState& state,
                               double symbol_rate) {
    if (!state.enabled) return tx_beam1;
    const double step = kTwoPi * state.nco_frequency_hz / symbol_rate;
    SymbolBlock out(tx_beam1.size());
    double ramp = state.ramp_accum_rad;
    for (std::size_t t = 0; t < out.size(); ++t) {
        ramp = wrap_phase(ramp + step);
        out[t] = tx_beam1[t] * std::polar(1.0, -(ramp + state.nco_phase_rad));
    }
    state.ramp_accum_rad = ramp;
    return out;
}

PrecodingMatrix select_precoder(PrecoderMode mode, const Mat2& h, double sigma2,
                                const PacConfig& pac, PacDiagnostics* diag) {
    switch (mode) {
        case PrecoderMode::Unprecoded: {
            PrecodingMatrix w{Mat2::identity()};
            w.normalized = true;  // identity rows are trivially envelope-normalized
            return w;
        }
        case PrecoderMode::MMSE:
            return normalize_rows(compute_mmse(h, sigma2));
        case PrecoderMode::MMSE_PAC:
            return normalize_rows(compute_mmse_pac(h, pac, diag));
    }
    throw Error("select_precoder: unknown mode");
}

Gateway::Gateway(const SuperframeLayout& layout, const PilotSet& pilots,
                 const BeamSequences& sequences, const Options& opts)
    : layout_(layout),
      pilots_(pilots),
      sequences_(sequences),
      opts_(opts),
      precoder_{Mat2::identity()},
      payload_rng_{SeededRng(derive_seed(opts.payload_seed, 100)),
                   SeededRng(derive_seed(opts.payload_seed, 101))} {
    layout_.validate();
    precoder_.normalized = true;
    comp_.k_f = opts.comp_k_f;
    comp_.k_p = opts.comp_k_p;
    comp_.max_frequency_hz = opts.comp_max_hz;
}

void Gateway::deliver_report(const CsiReport& report) {
    const int u = report.terminal_id;
    latest_[u] = report;
    auto& win = noise_window_[u];
    win.push_back(report.estimate.noise_variance);
    while (win.size() > static_cast<std::size_t>(opts_.noise_report_window)) win.pop_front();

    // Terminal 0 anchors the compensation loop; consume a report only when its
    // estimation window postdates the previous correction's on-air time.
    if (u == 0 && comp_.enabled && report.estimate.timestamp >= comp_ready_at_symbol_) {
        update_compensation(comp_, report.differential);
        const std::uint64_t window =
            static_cast<std::uint64_t>(layout_.pilot_spacing) * opts_.diff_window;
        comp_ready_at_symbol_ = next_tx_symbol_ + layout_.total_length() + window;
    }
}

AssembledChannel Gateway::assemble_channel(double t_now_s) const {
    AssembledChannel out;
    out.age_s = 0.0;
    double sigma_sum = 0.0;
    for (int u = 0; u < 2; ++u) {
        if (!latest_[u]) throw StaleCsi("assemble_channel: no report from terminal");
        const double age =
            t_now_s - static_cast<double>(latest_[u]->estimate.timestamp) / opts_.symbol_rate;
        if (age > opts_.staleness_s) throw StaleCsi("assemble_channel: report beyond staleness bound");
        out.age_s = std::max(out.age_s, age);
        for (int b = 0; b < 2; ++b) out.h.at(u, b) = latest_[u]->estimate.csi[b];
        const auto& win = noise_window_[u];
        double acc = 0.0;
        for (double v : win) acc += v;
        sigma_sum += acc / static_cast<double>(win.size());
    }
    out.sigma2 = 0.5 * sigma_sum;
    if (!out.h.all_finite()) throw StaleCsi("assemble_channel: non-finite CSI");
    return out;
}

void Gateway::update_precoder(double t_now_s) {
    try {
        const AssembledChannel ch = assemble_channel(t_now_s);
        PacDiagnostics diag;
        precoder_ = select_precoder(mode_, ch.h, ch.sigma2, opts_.pac, &diag);
        last_pac_residual_ = mode_ == PrecoderMode::MMSE_PAC ? diag.residual : 0.0;
    } catch (const StaleCsi&) {
        // hold the last precoder
    } catch (const SingularMatrix&) {
    } catch (const NonConvergence&) {
    } catch (const ZeroRow&) {
    }
}

std::array<SymbolBlock, 2> Gateway::transmit_superframe(std::uint64_t t0) {
    next_tx_symbol_ = t0 + layout_.total_length();
    const double t_now_s = static_cast<double>(t0) / opts_.symbol_rate;
    if (mode_ == PrecoderMode::Unprecoded) {
        precoder_ = PrecodingMatrix{Mat2::identity()};
        precoder_.normalized = true;
        last_pac_residual_ = 0.0;
    } else {
        update_precoder(t_now_s);
    }

    const int bps = bits_per_symbol(layout_.data_modulation);
    const std::size_t bits_needed =
        static_cast<std::size_t>(layout_.frames_per_superframe) * layout_.data_frame_length * bps;
    std::array<std::vector<std::uint8_t>, 2> payload;
    for (int b = 0; b < 2; ++b) {
        payload[b].resize(bits_needed);
        for (auto& bit : payload[b]) bit = static_cast<std::uint8_t>(payload_rng_[b].bits() & 1);
    }

    const std::uint64_t first_frame =
        t0 / layout_.total_length() * layout_.frames_per_superframe;
    Superframe sf = build_superframe(layout_, pilots_, sequences_, payload, first_frame);
    for (const Segment& seg : sf.segments) {
        if (!seg.precoded) continue;
        for (std::size_t t = seg.offset; t < seg.offset + seg.length; ++t) {
            const auto x = apply_precoder(precoder_, {sf.beams[0][t], sf.beams[1][t]});
            sf.beams[0][t] = x[0];
            sf.beams[1][t] = x[1];
        }
    }
    sf.beams[1] = apply_compensation(sf.beams[1], comp_, opts_.symbol_rate);

    LogRow row;
    row.t_symbol = t0;
    row.mode = mode_;
    row.nco_f_hz = comp_.nco_frequency_hz;
    row.nco_phase_rad = comp_.nco_phase_rad;
    row.w = precoder_.w;
    row.row_norm = precoder_.row_norm;
    row.residual_pac = last_pac_residual_;
    try {
        row.csi_age_s = assemble_channel(t_now_s).age_s;
    } catch (const StaleCsi&) {
        row.csi_age_s = -1.0;
    }
    log_.push_back(row);

    return {std::move(sf.beams[0]), std::move(sf.beams[1])};
}

}  // namespace satlink

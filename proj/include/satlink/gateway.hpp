// Gateway closed-loop controller: CSI ingestion, differential frequency/phase
// pre-compensation NCO, precoder selection with fallback, and superframe
// transmission with per-segment precoding.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "satlink/framing.hpp"
#include "satlink/noise.hpp"
#include "satlink/precoding.hpp"
#include "satlink/terminal.hpp"

namespace satlink {

struct CompensationState {
    double nco_frequency_hz = 0.0;  // applied to beam 1 relative to beam 0
    double nco_phase_rad = 0.0;
    double k_f = 0.3;
    double k_p = 0.5;
    bool enabled = false;
    double max_frequency_hz = 1000.0;

    double ramp_accum_rad = 0.0;  // NCO ramp phase, continuous across blocks
};

/// Second-order loop update from a terminal-reported differential estimate;
/// the applied rotation cancels the measured differential.
void update_compensation(CompensationState& state, const DifferentialEstimate& d);

/// Rotate beam 1's stream by -(ramp + 2 pi f t T + phase); beam 0 is the
/// phase reference and is never touched. Advances the ramp accumulator.
SymbolBlock apply_compensation(const SymbolBlock& tx_beam1, CompensationState& state,
                               double symbol_rate);

enum class PrecoderMode { Unprecoded, MMSE, MMSE_PAC };
const char* precoder_mode_name(PrecoderMode m);

struct AssembledChannel {
    Mat2 h;         // row u = terminal u's reported (CSI0, CSI1)
    double sigma2;  // mean of the terminals' windowed noise reports
    double age_s;   // age of the oldest constituent report
};

/// Unprecoded -> identity; MMSE -> normalize_rows(compute_mmse(h, sigma2));
/// MMSE_PAC -> normalize_rows(compute_mmse_pac(h, pac)). Solver errors
/// propagate; callers keep the previous precoder on failure.
PrecodingMatrix select_precoder(PrecoderMode mode, const Mat2& h, double sigma2,
                                const PacConfig& pac, PacDiagnostics* diag = nullptr);

class Gateway {
  public:
    struct Options {
        double symbol_rate = 1.0e6;
        PacConfig pac;
        double staleness_s = 2.0;  // CSI freshness bound for precoder updates
        int noise_report_window = 10;
        double comp_k_f = 0.3;
        double comp_k_p = 0.5;
        double comp_max_hz = 1000.0;
        int diff_window = 8;  // terminals' differential estimation window, for the loop gate
        std::uint64_t payload_seed = 1;
    };

    /// Per-superframe log entry, one row per transmission.
    struct LogRow {
        std::uint64_t t_symbol = 0;
        PrecoderMode mode = PrecoderMode::Unprecoded;
        double nco_f_hz = 0.0;
        double nco_phase_rad = 0.0;
        Mat2 w;
        std::array<double, 2> row_norm{1.0, 1.0};
        double residual_pac = 0.0;
        double csi_age_s = -1.0;  // -1 when no usable pair of reports
    };

    Gateway(const SuperframeLayout& layout, const PilotSet& pilots, const BeamSequences& sequences,
            const Options& opts);

    void set_mode(PrecoderMode mode) { mode_ = mode; }
    PrecoderMode mode() const { return mode_; }
    void set_compensation_enabled(bool enabled) { comp_.enabled = enabled; }
    const CompensationState& compensation() const { return comp_; }
    CompensationState& compensation() { return comp_; }

    /// Feedback-channel delivery (in order). Drives the compensation loop and
    /// the per-terminal report caches.
    void deliver_report(const CsiReport& report);

    /// Network channel from the freshest report per terminal. Throws StaleCsi
    /// when any report is missing or older than the staleness bound.
    AssembledChannel assemble_channel(double t_now_s) const;

    /// Build, precode (P2 + data segments only), and compensate one superframe.
    std::array<SymbolBlock, 2> transmit_superframe(std::uint64_t t0);

    const std::vector<LogRow>& log() const { return log_; }
    const PrecodingMatrix& current_precoder() const { return precoder_; }

  private:
    void update_precoder(double t_now_s);

    SuperframeLayout layout_;
    PilotSet pilots_;
    BeamSequences sequences_;
    Options opts_;
    PrecoderMode mode_ = PrecoderMode::Unprecoded;
    CompensationState comp_;
    PrecodingMatrix precoder_;  // identity until the first successful update
    double last_pac_residual_ = 0.0;

    std::array<std::optional<CsiReport>, 2> latest_;
    std::array<std::deque<double>, 2> noise_window_;
    // Compensation loop gate: only consume a measurement whose estimation
    // window lies entirely after the previous correction reached the air
    // (next transmitted superframe). Keeps the loop stable for any feedback
    // latency; without it, gain x delay >> 1 and the loop oscillates.
    std::uint64_t comp_ready_at_symbol_ = 0;
    std::uint64_t next_tx_symbol_ = 0;

    std::array<SeededRng, 2> payload_rng_;
    std::vector<LogRow> log_;
};

}  // namespace satlink

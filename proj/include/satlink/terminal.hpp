// Terminal-side receiver: SOSF sync, CSI estimation from WH SF-pilots,
// differential phase/frequency estimation from the CSI history, data-aided
// SINR from P2 pilots, MODCOD accounting, and CSI feedback emission.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "satlink/framing.hpp"
#include "satlink/types.hpp"

namespace satlink {

struct ChannelEstimate {
    std::array<Complex, 2> csi{};  // per received beam
    int pilot_index = 0;
    std::uint64_t timestamp = 0;  // symbol index of the pilot field start
    double noise_variance = 0.0;
};

struct DifferentialEstimate {
    double epsilon = 0.0;       // cycles per symbol
    double frequency_hz = 0.0;  // epsilon / T
    double phase_rad = 0.0;     // instantaneous differential phase, beam 0 reference
    int reference_beam = 0;
};

struct CsiReport {
    int terminal_id = 0;
    ChannelEstimate estimate;  // smoothed CSI and noise variance
    DifferentialEstimate differential;
    double sinr_db = 0.0;

    /// `t_symbol, terminal_id, re(csi0), im(csi0), re(csi1), im(csi1), eps,
    /// f_hz, sinr_db, sigma2` with 9-significant-digit floats.
    std::string to_record() const;
};

struct ModcodEntry {
    Modulation modulation = Modulation::QPSK;
    int rate_num = 1;
    int rate_den = 2;
    double required_sinr_db = 0.0;
    std::string label;

    double coderate() const { return static_cast<double>(rate_num) / rate_den; }
    double efficiency() const { return bits_per_symbol(modulation) * coderate(); }
};

class ModcodTable {
  public:
    ModcodTable() = default;
    explicit ModcodTable(std::vector<ModcodEntry> entries);

    /// Highest-efficiency entry whose required SINR is met; nullptr if none.
    const ModcodEntry* select(double sinr_db) const;
    /// Lookup by label; throws UnknownModcod.
    const ModcodEntry& by_label(const std::string& label) const;
    const std::vector<ModcodEntry>& entries() const { return entries_; }

    /// Built-in operating points (QPSK/8PSK subset with implementation margin).
    static ModcodTable default_table();

  private:
    std::vector<ModcodEntry> entries_;  // sorted by efficiency
};

/// CSI_k = (1/32) sum_t y[t] conj(p_k[t]) over the WH core; exact per-beam
/// complex gain in the noiseless case thanks to WH orthogonality.
std::array<Complex, 2> estimate_csi(std::span<const Complex> pilot_field, const PilotSet& pilots);

/// Mean squared residual of y - sum_k CSI_k p_k over the 32-chip core.
double estimate_noise_variance(std::span<const Complex> pilot_field, const PilotSet& pilots,
                               const std::array<Complex, 2>& csi);

/// Differential frequency/phase from consecutive CSI pairs; the per-pair phase
/// increments are normalized by the actual timestamp spacing and averaged over
/// the window. Throws Ambiguous when the estimate approaches the pilot-rate
/// Nyquist guard (90% of 0.5 cycles per spacing).
DifferentialEstimate estimate_differential(std::span<const ChannelEstimate> history,
                                           double symbol_rate, int window = 8);

/// Data-aided estimate: c = mean(y conj(p)); SINR = |c|^2 / (mean|y|^2 - |c|^2)
/// in dB, capped at +40 dB.
double estimate_sinr_p2(std::span<const Complex> received, std::span<const Complex> reference);

struct FrameOutcome {
    bool delivered = false;
    std::uint64_t delivered_bits = 0;
};

/// Sharp-threshold frame-error model: delivered iff sinr >= required SINR of
/// the labeled MODCOD; delivered bits = symbols * bits/symbol * coderate.
/// Throws UnknownModcod for labels absent from the table.
FrameOutcome demodulate_and_account(const SymbolBlock& data, const std::string& modcod_label,
                                    double sinr_db, const ModcodTable& table);

struct FrameRecord {
    std::uint64_t t_symbol = 0;
    int frame_index = 0;
    std::string modcod_label;  // empty when no MODCOD is supported
    double sinr_db = 0.0;      // smoothed SINR used for selection
    FrameOutcome outcome;
};

/// Per-terminal receiver state machine over superframe-aligned blocks.
class Terminal {
  public:
    struct Options {
        double symbol_rate = 1.0e6;
        double csi_smoothing = 0.5;   // EMA weight of the newest CSI observation
        double sinr_smoothing = 0.1;  // EMA weight of the newest SINR estimate (dB domain)
        int diff_window = 8;
        double sosf_threshold = 0.5;
    };

    struct BlockResult {
        std::vector<CsiReport> reports;  // one per SF-pilot field
        std::vector<FrameRecord> frames;
        std::vector<double> instantaneous_sinr_db;  // one per completed P2 field
        int nosync_events = 0;
    };

    Terminal(int id, const SuperframeLayout& layout, const PilotSet& pilots,
             const BeamSequences& sequences, const ModcodTable& table, const Options& opts);

    /// Process one received superframe (block starts at symbol index t0).
    BlockResult process_block(const SymbolBlock& rx, std::uint64_t t0);

    int id() const { return id_; }
    bool synced() const { return synced_; }

  private:
    CsiReport make_report(std::uint64_t timestamp);

    int id_;
    SuperframeLayout layout_;
    PilotSet pilots_;
    BeamSequences sequences_;
    ModcodTable table_;
    Options opts_;
    std::vector<Segment> segment_map_;

    bool synced_ = false;
    int pilot_index_ = 0;
    bool have_csi_ = false;
    std::array<Complex, 2> smoothed_csi_{};
    double smoothed_sigma2_ = 0.0;
    bool have_sinr_ = false;
    double smoothed_sinr_db_ = 0.0;
    double last_sinr_db_ = 0.0;
    std::deque<ChannelEstimate> history_;
    DifferentialEstimate last_differential_{};

    // Per-frame accumulation (P2 and data may split across pilot gaps).
    struct FrameProgress {
        SymbolBlock p2;
        std::size_t data_symbols = 0;
        std::uint64_t start_symbol = 0;
    };
    std::vector<FrameProgress> progress_;
};

}  // namespace satlink

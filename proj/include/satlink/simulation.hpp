// The deterministic closed-loop simulation: gateway -> channel -> terminals ->
// delayed feedback, block-by-block over superframes, with CSV metric emission
// and the noise-calibration search used by the precoding-gains preset.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "satlink/gateway.hpp"
#include "satlink/scenario.hpp"
#include "satlink/terminal.hpp"

namespace satlink {

struct TerminalSeriesRow {
    std::uint64_t t_symbol = 0;  // pilot-field start
    Complex csi0{};
    Complex csi1{};
    double eps = 0.0;
    double f_hz = 0.0;
    double phase_deg = 0.0;
    double sinr_db = 0.0;  // latest per-P2-field estimate (NaN before the first)
    double sigma2 = 0.0;
    std::uint64_t delivered_bits = 0;  // delivered since the previous row
};

struct Aggregates {
    std::array<double, 2> mean_sinr_db{};
    std::array<double, 2> goodput_mbps{};
    double system_goodput_mbps = 0.0;
};

struct MetricsLog {
    double symbol_rate = 0.0;
    double duration_s = 0.0;
    double metrics_start_s = 0.0;
    std::array<std::vector<TerminalSeriesRow>, 2> terminals;
    std::array<std::vector<FrameRecord>, 2> frames;
    std::vector<Gateway::LogRow> gateway;
    int nosync_events = 0;

    /// Recomputed from the series over [metrics_start, duration].
    Aggregates aggregates() const;
};

MetricsLog run_scenario(const ScenarioConfig& cfg);

/// Writes terminal<u>_series.csv, gateway_log.csv and aggregates.csv into dir
/// (created if needed). Floats are formatted at 9 significant digits.
void emit_csv(const MetricsLog& log, const std::string& dir);

/// Re-parse of the per-terminal series files (round-trip check and tooling).
std::array<std::vector<TerminalSeriesRow>, 2> parse_terminal_series_csv(const std::string& dir);

struct CalibrationResult {
    std::array<double, 2> noise_variance{};
    std::array<double, 2> achieved_sinr_db{};
    int probes = 0;
};

/// Bisection on each terminal's noise power against its own SINR estimator
/// until the unprecoded mean SINR lands on the targets. Both brackets update
/// from the same probe runs.
CalibrationResult calibrate_unprecoded_sinr(const ScenarioConfig& base,
                                            std::array<double, 2> targets_db,
                                            double tolerance_db = 0.05, int max_probes = 14);

struct CalibratedGainsRuns {
    CalibrationResult calibration;
    PrecodingGainsPreset preset;  // with calibrated noise variances applied
};

/// preset_precoding_gains() with the noise calibration performed.
CalibratedGainsRuns calibrated_precoding_gains();

}  // namespace satlink

// Scenario configuration: every knob of a simulation run, a flat key = value
// text format for it, and the experiment presets.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "satlink/channel.hpp"
#include "satlink/framing.hpp"
#include "satlink/gateway.hpp"
#include "satlink/precoding.hpp"
#include "satlink/terminal.hpp"

namespace satlink {

struct GeometryConfig {
    // gain_db[terminal][beam], phase_deg[terminal][beam]
    std::array<std::array<double, 2>, 2> gain_db{{{0.0, -300.0}, {-300.0, 0.0}}};
    std::array<std::array<double, 2>, 2> phase_deg{{{0.0, 0.0}, {0.0, 0.0}}};
    double amp_drift_db_per_hour = 0.0;

    LinkGeometry to_link_geometry() const;
};

struct TransponderConfig {
    double frequency_offset_hz = 0.0;
    double phase_noise_rate = 0.0;  // rad^2/s
    double gain_db = 0.0;
    double gain_phase_deg = 0.0;
};

struct ScenarioConfig {
    double symbol_rate_hz = 10.33e6;  // 12.4 MHz bandwidth with 20% roll-off
    double duration_s = 1.0;
    double metrics_start_s = 0.0;  // aggregates/assertions window start
    std::uint64_t seed = 1;

    GeometryConfig geometry;
    std::array<MixingConfig, 2> mixing{{{0.5, 0.5}, {0.5, 0.5}}};
    std::array<TransponderConfig, 2> transponders;
    std::array<double, 2> noise_variance{0.0, 0.0};  // per polarization chain

    std::vector<std::pair<double, PrecoderMode>> mode_schedule{{0.0, PrecoderMode::Unprecoded}};
    std::vector<std::pair<double, bool>> comp_schedule{{0.0, false}};
    double comp_k_f = 0.3;
    double comp_k_p = 0.5;
    double comp_max_hz = 1000.0;

    SuperframeLayout layout;
    std::vector<ModcodEntry> modcod;  // empty -> ModcodTable::default_table()

    double feedback_latency_s = 0.5;
    double staleness_s = 2.0;
    int noise_report_window = 10;

    double csi_smoothing = 0.5;
    double sinr_smoothing = 0.1;
    int diff_window = 8;
    double sosf_threshold = 0.5;

    PacConfig pac;

    /// Throws ConfigError (message prefixed with the dotted field path).
    void validate() const;

    PrecoderMode mode_at(double t_s) const;
    bool compensation_at(double t_s) const;
    ModcodTable modcod_table() const;

    /// Resolved config echo in the same key = value grammar (re-parseable).
    std::string manifest() const;
};

/// Apply `key = value` lines to a config. Unknown keys, malformed values and
/// inconsistent results raise ConfigError.
void apply_config_text(ScenarioConfig& cfg, const std::string& text);
ScenarioConfig parse_config_file(const std::string& path);

// Experiment presets.
ScenarioConfig default_scenario();

/// 25 s pair differing only in the compensation enable (off, on), with a
/// 50 Hz injected differential LO offset.
std::pair<ScenarioConfig, ScenarioConfig> preset_compensation_experiment();

/// Two-minute CSI magnitude logging run at 60x-accelerated drift (stands in
/// for the two-hour measurement). The zero-noise variant freezes every random
/// impairment, so the logged magnitudes are exactly constant.
ScenarioConfig preset_csi_stability(bool zero_noise = false);

struct PrecodingGainsPreset {
    ScenarioConfig unprecoded;
    ScenarioConfig mmse;
    ScenarioConfig mmse_pac;
};

/// Identical channel/noise calibration across the triple; modes differ.
/// Noise variances are placeholders until calibration pins them.
PrecodingGainsPreset preset_precoding_gains();

}  // namespace satlink

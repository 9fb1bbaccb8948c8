#include "satlink/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "satlink/errors.hpp"

namespace satlink {

namespace {

std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

constexpr char kTerminalHeader[] =
    "t_symbol,csi0_re,csi0_im,csi1_re,csi1_im,eps,f_hz,phase_deg,sinr_db,sigma2,delivered_bits";
constexpr char kGatewayHeader[] =
    "t_symbol,mode,nco_f_hz,nco_phase_rad,w11_re,w11_im,w12_re,w12_im,w21_re,w21_im,w22_re,"
    "w22_im,a1,a2,residual_pac,csi_age_s";

}  // namespace

Aggregates MetricsLog::aggregates() const {
    Aggregates agg;
    const double start_symbol = metrics_start_s * symbol_rate;
    const double window_s = duration_s - metrics_start_s;
    for (int u = 0; u < 2; ++u) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const TerminalSeriesRow& row : terminals[u]) {
            if (static_cast<double>(row.t_symbol) < start_symbol) continue;
            if (!std::isfinite(row.sinr_db)) continue;
            acc += row.sinr_db;
            ++n;
        }
        agg.mean_sinr_db[u] = n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();

        std::uint64_t bits = 0;
        for (const FrameRecord& f : frames[u]) {
            if (static_cast<double>(f.t_symbol) < start_symbol) continue;
            bits += f.outcome.delivered_bits;
        }
        agg.goodput_mbps[u] = static_cast<double>(bits) / window_s / 1e6;
    }
    agg.system_goodput_mbps = agg.goodput_mbps[0] + agg.goodput_mbps[1];
    return agg;
}

MetricsLog run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();

    SuperframeLayout layout = cfg.layout;
    const PilotSet pilots = build_pilot_set(kNumBeams);
    const BeamSequences sequences = make_beam_sequences(layout);
    const ModcodTable table = cfg.modcod_table();

    Gateway::Options gw_opts;
    gw_opts.symbol_rate = cfg.symbol_rate_hz;
    gw_opts.pac = cfg.pac;
    gw_opts.staleness_s = cfg.staleness_s;
    gw_opts.noise_report_window = cfg.noise_report_window;
    gw_opts.comp_k_f = cfg.comp_k_f;
    gw_opts.comp_k_p = cfg.comp_k_p;
    gw_opts.comp_max_hz = cfg.comp_max_hz;
    gw_opts.diff_window = cfg.diff_window;
    gw_opts.payload_seed = derive_seed(cfg.seed, 10);
    Gateway gateway(layout, pilots, sequences, gw_opts);

    std::array<TransponderState, 2> transponders;
    for (int b = 0; b < 2; ++b) {
        transponders[b].lo_frequency_offset_hz = cfg.transponders[b].frequency_offset_hz;
        transponders[b].phase_noise_rate = cfg.transponders[b].phase_noise_rate;
        transponders[b].gain = std::polar(db_to_linear_amplitude(cfg.transponders[b].gain_db),
                                          cfg.transponders[b].gain_phase_deg * kPi / 180.0);
        transponders[b].seed = derive_seed(cfg.seed, 30 + b);
    }
    ChannelEmulator channel(cfg.geometry.to_link_geometry(), transponders, cfg.mixing,
                            cfg.noise_variance, cfg.symbol_rate_hz, derive_seed(cfg.seed, 20));

    Terminal::Options t_opts;
    t_opts.symbol_rate = cfg.symbol_rate_hz;
    t_opts.csi_smoothing = cfg.csi_smoothing;
    t_opts.sinr_smoothing = cfg.sinr_smoothing;
    t_opts.diff_window = cfg.diff_window;
    t_opts.sosf_threshold = cfg.sosf_threshold;
    std::array<Terminal, 2> terminals{Terminal(0, layout, pilots, sequences, table, t_opts),
                                      Terminal(1, layout, pilots, sequences, table, t_opts)};

    MetricsLog log;
    log.symbol_rate = cfg.symbol_rate_hz;
    log.duration_s = cfg.duration_s;
    log.metrics_start_s = cfg.metrics_start_s;

    const std::uint64_t sf_len = layout.total_length();
    const std::uint64_t total_symbols =
        static_cast<std::uint64_t>(cfg.duration_s * cfg.symbol_rate_hz);
    const std::uint64_t n_superframes = (total_symbols + sf_len - 1) / sf_len;
    const std::uint64_t latency_symbols =
        static_cast<std::uint64_t>(cfg.feedback_latency_s * cfg.symbol_rate_hz);

    std::deque<std::pair<std::uint64_t, CsiReport>> feedback;  // (deliver_at, report)
    std::array<std::uint64_t, 2> pending_bits{0, 0};
    std::array<double, 2> last_inst_sinr{std::numeric_limits<double>::quiet_NaN(),
                                         std::numeric_limits<double>::quiet_NaN()};

    for (std::uint64_t sf = 0; sf < n_superframes; ++sf) {
        const std::uint64_t t0 = sf * sf_len;
        const double t_s = static_cast<double>(t0) / cfg.symbol_rate_hz;
        gateway.set_mode(cfg.mode_at(t_s));
        gateway.set_compensation_enabled(cfg.compensation_at(t_s));

        while (!feedback.empty() && feedback.front().first <= t0) {
            gateway.deliver_report(feedback.front().second);
            feedback.pop_front();
        }

        const auto tx = gateway.transmit_superframe(t0);
        const auto rx = channel.process(tx);

        for (int u = 0; u < 2; ++u) {
            Terminal::BlockResult res = terminals[u].process_block(rx[u], t0);
            log.nosync_events += res.nosync_events;

            // Interleave the per-field events back into time order: reports,
            // P2 estimates and frame completions all carry symbol timestamps,
            // but within one block the vectors are already ordered, so walk
            // them together keyed on the report timestamps.
            std::size_t fi = 0;  // frames
            std::size_t si = 0;  // instantaneous sinr values, in P2 order
            const auto& p2_rows = res.instantaneous_sinr_db;
            // P2 fields complete in lockstep with frames in this layout; the
            // per-report rows want "latest instantaneous SINR at report time".
            std::vector<std::uint64_t> p2_times;
            for (const FrameRecord& f : res.frames) p2_times.push_back(f.t_symbol);

            for (const CsiReport& rep : res.reports) {
                // account frames completed before this report
                while (fi < res.frames.size() && res.frames[fi].t_symbol < rep.estimate.timestamp) {
                    pending_bits[u] += res.frames[fi].outcome.delivered_bits;
                    if (si < p2_rows.size()) last_inst_sinr[u] = p2_rows[si++];
                    ++fi;
                }
                TerminalSeriesRow row;
                row.t_symbol = rep.estimate.timestamp;
                row.csi0 = rep.estimate.csi[0];
                row.csi1 = rep.estimate.csi[1];
                row.eps = rep.differential.epsilon;
                row.f_hz = rep.differential.frequency_hz;
                row.phase_deg = rep.differential.phase_rad * 180.0 / kPi;
                row.sinr_db = last_inst_sinr[u];
                row.sigma2 = rep.estimate.noise_variance;
                row.delivered_bits = pending_bits[u];
                pending_bits[u] = 0;
                log.terminals[u].push_back(row);

                feedback.emplace_back(rep.estimate.timestamp + latency_symbols, rep);
            }
            for (; fi < res.frames.size(); ++fi) {
                pending_bits[u] += res.frames[fi].outcome.delivered_bits;
                if (si < p2_rows.size()) last_inst_sinr[u] = p2_rows[si++];
            }
            for (FrameRecord& f : res.frames) log.frames[u].push_back(std::move(f));
        }
    }
    log.gateway = gateway.log();
    return log;
}

void emit_csv(const MetricsLog& log, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (int u = 0; u < 2; ++u) {
        std::ofstream out(dir + "/terminal" + std::to_string(u) + "_series.csv",
                          std::ios::trunc | std::ios::binary);
        if (!out) throw Error("emit_csv: cannot write terminal series");
        out << kTerminalHeader << "\n";
        for (const TerminalSeriesRow& r : log.terminals[u]) {
            out << r.t_symbol << ',' << g9(r.csi0.real()) << ',' << g9(r.csi0.imag()) << ','
                << g9(r.csi1.real()) << ',' << g9(r.csi1.imag()) << ',' << g9(r.eps) << ','
                << g9(r.f_hz) << ',' << g9(r.phase_deg) << ',' << g9(r.sinr_db) << ','
                << g9(r.sigma2) << ',' << r.delivered_bits << "\n";
        }
    }
    {
        std::ofstream out(dir + "/gateway_log.csv", std::ios::trunc | std::ios::binary);
        if (!out) throw Error("emit_csv: cannot write gateway log");
        out << kGatewayHeader << "\n";
        for (const Gateway::LogRow& r : log.gateway) {
            out << r.t_symbol << ',' << precoder_mode_name(r.mode) << ',' << g9(r.nco_f_hz) << ','
                << g9(r.nco_phase_rad);
            for (const Complex& w : r.w.e) out << ',' << g9(w.real()) << ',' << g9(w.imag());
            out << ',' << g9(r.row_norm[0]) << ',' << g9(r.row_norm[1]) << ','
                << g9(r.residual_pac) << ',' << g9(r.csi_age_s) << "\n";
        }
    }
    {
        const Aggregates agg = log.aggregates();
        std::ofstream out(dir + "/aggregates.csv", std::ios::trunc | std::ios::binary);
        if (!out) throw Error("emit_csv: cannot write aggregates");
        out << "metric,value\n";
        out << "mean_sinr_db_ut0," << g9(agg.mean_sinr_db[0]) << "\n";
        out << "mean_sinr_db_ut1," << g9(agg.mean_sinr_db[1]) << "\n";
        out << "goodput_mbps_ut0," << g9(agg.goodput_mbps[0]) << "\n";
        out << "goodput_mbps_ut1," << g9(agg.goodput_mbps[1]) << "\n";
        out << "system_goodput_mbps," << g9(agg.system_goodput_mbps) << "\n";
        out << "nosync_events," << log.nosync_events << "\n";
    }
}

std::array<std::vector<TerminalSeriesRow>, 2> parse_terminal_series_csv(const std::string& dir) {
    std::array<std::vector<TerminalSeriesRow>, 2> out;
    for (int u = 0; u < 2; ++u) {
        std::ifstream in(dir + "/terminal" + std::to_string(u) + "_series.csv");
        if (!in) throw Error("parse_terminal_series_csv: cannot open series file");
        std::string line;
        if (!std::getline(in, line) || line != kTerminalHeader) {
            throw Error("parse_terminal_series_csv: unexpected header");
        }
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ls, field, ',')) fields.push_back(field);
            if (fields.size() != 11) throw Error("parse_terminal_series_csv: bad row");
            TerminalSeriesRow r;
            r.t_symbol = std::stoull(fields[0]);
            r.csi0 = {std::stod(fields[1]), std::stod(fields[2])};
            r.csi1 = {std::stod(fields[3]), std::stod(fields[4])};
            r.eps = std::stod(fields[5]);
            r.f_hz = std::stod(fields[6]);
            r.phase_deg = std::stod(fields[7]);
            r.sinr_db = std::stod(fields[8]);
            r.sigma2 = std::stod(fields[9]);
            r.delivered_bits = std::stoull(fields[10]);
            out[u].push_back(r);
        }
    }
    return out;
}

CalibrationResult calibrate_unprecoded_sinr(const ScenarioConfig& base,
                                            std::array<double, 2> targets_db, double tolerance_db,
                                            int max_probes) {
    // Probe variant: unprecoded, no differential offset (SINR is phase-blind),
    // short window. Mean SINR is monotone decreasing in the noise power, so
    // each probe tightens both terminals' log-domain brackets at once.
    ScenarioConfig probe = base;
    probe.mode_schedule = {{0.0, PrecoderMode::Unprecoded}};
    probe.transponders[0].frequency_offset_hz = 0.0;
    probe.transponders[1].frequency_offset_hz = 0.0;
    probe.duration_s = 4.0;
    probe.metrics_start_s = 1.5;

    std::array<double, 2> lo{1e-4, 1e-4};
    std::array<double, 2> hi{4.0, 4.0};
    CalibrationResult result;
    std::array<bool, 2> done{false, false};
    std::array<double, 2> current{};

    for (int it = 0; it < max_probes; ++it) {
        for (int u = 0; u < 2; ++u) {
            current[u] = done[u] ? current[u] : std::sqrt(lo[u] * hi[u]);
            probe.noise_variance[u] = current[u];
        }
        const Aggregates agg = run_scenario(probe).aggregates();
        ++result.probes;
        bool all_done = true;
        for (int u = 0; u < 2; ++u) {
            if (done[u]) continue;
            result.achieved_sinr_db[u] = agg.mean_sinr_db[u];
            if (std::abs(agg.mean_sinr_db[u] - targets_db[u]) <= tolerance_db) {
                done[u] = true;
                continue;
            }
            if (agg.mean_sinr_db[u] > targets_db[u]) {
                lo[u] = current[u];  // too little noise
            } else {
                hi[u] = current[u];
            }
            all_done = false;
        }
        if (all_done) break;
    }
    result.noise_variance = current;
    return result;
}

CalibratedGainsRuns calibrated_precoding_gains() {
    CalibratedGainsRuns runs;
    runs.preset = preset_precoding_gains();
    runs.calibration = calibrate_unprecoded_sinr(runs.preset.unprecoded, {-2.0, 5.0});
    for (ScenarioConfig* cfg :
         {&runs.preset.unprecoded, &runs.preset.mmse, &runs.preset.mmse_pac}) {
        cfg->noise_variance = runs.calibration.noise_variance;
    }
    return runs;
}

}  // namespace satlink

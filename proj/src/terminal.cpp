#include "satlink/terminal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "satlink/errors.hpp"

namespace satlink {

namespace {

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::uint64_t payload_bits_for(std::size_t data_symbols, const ModcodEntry& entry) {
    return static_cast<std::uint64_t>(data_symbols) * bits_per_symbol(entry.modulation) *
           entry.rate_num / entry.rate_den;
}

}  // namespace

std::string CsiReport::to_record() const {
    std::string out = std::to_string(estimate.timestamp) + ", " + std::to_string(terminal_id);
    for (double v : {estimate.csi[0].real(), estimate.csi[0].imag(), estimate.csi[1].real(),
                     estimate.csi[1].imag(), differential.epsilon, differential.frequency_hz,
                     sinr_db, estimate.noise_variance}) {
        out += ", " + format_g9(v);
    }
    return out;
}

ModcodTable::ModcodTable(std::vector<ModcodEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const ModcodEntry& a, const ModcodEntry& b) { return a.efficiency() < b.efficiency(); });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (entries_[i].required_sinr_db <= entries_[i - 1].required_sinr_db) {
            throw Error("ModcodTable: required SINR must increase with spectral efficiency");
        }
    }
}

const ModcodEntry* ModcodTable::select(double sinr_db) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (sinr_db >= it->required_sinr_db) return &*it;
    }
    return nullptr;
}

const ModcodEntry& ModcodTable::by_label(const std::string& label) const {
    for (const auto& e : entries_) {
        if (e.label == label) return e;
    }
    throw UnknownModcod("modcod not in table: " + label);
}

ModcodTable ModcodTable::default_table() {
    // DVB-S2 QPSK/8PSK operating points with the bench margin that reproduces
    // the observed switch points (QPSK 1/2 sustained at 3.6 dB, 2/3 at 5 dB,
    // nothing at -2 dB).
    return ModcodTable({
        {Modulation::QPSK, 1, 2, 1.0, "QPSK 1/2"},
        {Modulation::QPSK, 2, 3, 4.6, "QPSK 2/3"},
        {Modulation::QPSK, 3, 4, 5.9, "QPSK 3/4"},
        {Modulation::PSK8, 2, 3, 8.5, "8PSK 2/3"},
        {Modulation::PSK8, 3, 4, 10.4, "8PSK 3/4"},
    });
}

std::array<Complex, 2> estimate_csi(std::span<const Complex> pilot_field, const PilotSet& pilots) {
    if (pilot_field.size() < PilotSet::kCoreLength) {
        throw LengthMismatch("estimate_csi: pilot field shorter than the WH core");
    }
    std::array<Complex, 2> csi{};
    for (int k = 0; k < kNumBeams; ++k) {
        Complex acc{};
        const SymbolBlock& p = pilots.sequences[k];
        for (int t = 0; t < PilotSet::kCoreLength; ++t) {
            acc += pilot_field[t] * std::conj(p[t]);
        }
        csi[k] = acc / static_cast<double>(PilotSet::kCoreLength);
    }
    return csi;
}

double estimate_noise_variance(std::span<const Complex> pilot_field, const PilotSet& pilots,
                               const std::array<Complex, 2>& csi) {
    if (pilot_field.size() < PilotSet::kCoreLength) {
        throw LengthMismatch("estimate_noise_variance: pilot field shorter than the WH core");
    }
    double acc = 0.0;
    for (int t = 0; t < PilotSet::kCoreLength; ++t) {
        Complex fit{};
        for (int k = 0; k < kNumBeams; ++k) fit += csi[k] * pilots.sequences[k][t];
        acc += std::norm(pilot_field[t] - fit);
    }
    return acc / PilotSet::kCoreLength;
}

DifferentialEstimate estimate_differential(std::span<const ChannelEstimate> history,
                                           double symbol_rate, int window) {
    if (history.size() < 2) throw Error("estimate_differential: need at least two estimates");
    const std::size_t n = std::min<std::size_t>(history.size(), std::max(window, 2));
    const std::size_t first = history.size() - n;

    double eps_sum = 0.0;
    std::size_t pairs = 0;
    Complex r_prev{};
    for (std::size_t i = first; i < history.size(); ++i) {
        const Complex r = history[i].csi[1] * std::conj(history[i].csi[0]);
        if (i > first) {
            const double spacing =
                static_cast<double>(history[i].timestamp - history[i - 1].timestamp);
            if (spacing <= 0.0) throw Error("estimate_differential: non-monotone timestamps");
            const double eps = std::arg(r * std::conj(r_prev)) / (kTwoPi * spacing);
            // 90% of the per-spacing Nyquist range; beyond it the wrapped
            // increment is indistinguishable from an alias.
            if (std::abs(eps) > 0.9 * 0.5 / spacing) {
                throw Ambiguous("estimate_differential: beyond pilot-rate Nyquist guard");
            }
            eps_sum += eps;
            ++pairs;
        }
        r_prev = r;
    }
    DifferentialEstimate d;
    d.epsilon = eps_sum / pairs;
    d.frequency_hz = d.epsilon * symbol_rate;
    d.phase_rad = std::arg(r_prev);
    d.reference_beam = 0;
    return d;
}

double estimate_sinr_p2(std::span<const Complex> received, std::span<const Complex> reference) {
    if (received.size() != reference.size() || received.empty()) {
        throw LengthMismatch("estimate_sinr_p2: received/reference size mismatch");
    }
    Complex c{};
    double power = 0.0;
    for (std::size_t t = 0; t < received.size(); ++t) {
        c += received[t] * std::conj(reference[t]);
        power += std::norm(received[t]);
    }
    c /= static_cast<double>(received.size());
    power /= static_cast<double>(received.size());
    const double signal = std::norm(c);
    const double residual = power - signal;
    if (residual <= 0.0 || signal / residual >= 1e4) return 40.0;
    return linear_power_to_db(signal / residual);
}

FrameOutcome demodulate_and_account(const SymbolBlock& data, const std::string& modcod_label,
                                    double sinr_db, const ModcodTable& table) {
    const ModcodEntry& entry = table.by_label(modcod_label);
    if (sinr_db < entry.required_sinr_db) return {false, 0};
    return {true, payload_bits_for(data.size(), entry)};
}

Terminal::Terminal(int id, const SuperframeLayout& layout, const PilotSet& pilots,
                   const BeamSequences& sequences, const ModcodTable& table, const Options& opts)
    : id_(id),
      layout_(layout),
      pilots_(pilots),
      sequences_(sequences),
      table_(table),
      opts_(opts),
      segment_map_(superframe_segment_map(layout)) {}

CsiReport Terminal::make_report(std::uint64_t timestamp) {
    CsiReport report;
    report.terminal_id = id_;
    report.estimate = {smoothed_csi_, pilot_index_, timestamp, smoothed_sigma2_};
    report.differential = last_differential_;
    report.sinr_db = have_sinr_ ? smoothed_sinr_db_ : 0.0;
    return report;
}

Terminal::BlockResult Terminal::process_block(const SymbolBlock& rx, std::uint64_t t0) {
    if (rx.size() != layout_.total_length()) {
        throw LengthMismatch("Terminal: block size does not match the layout");
    }
    BlockResult result;

    if (!synced_) {
        try {
            const SosfDetection det = detect_sosf(rx, sequences_.sosf[id_], opts_.sosf_threshold);
            if (det.offset != 0) {
                ++result.nosync_events;
                return result;
            }
            synced_ = true;
        } catch (const NoSync&) {
            ++result.nosync_events;
            return result;
        }
    } else if (sosf_metric_at(rx, sequences_.sosf[id_], 0) < opts_.sosf_threshold) {
        ++result.nosync_events;
    }

    progress_.assign(layout_.frames_per_superframe, FrameProgress{});

    for (const Segment& seg : segment_map_) {
        switch (seg.type) {
            case SegmentType::Sosf:
                break;
            case SegmentType::SfPilot: {
                const std::span<const Complex> field(rx.data() + seg.offset, seg.length);
                const auto raw = estimate_csi(field, pilots_);
                const double sigma2 = estimate_noise_variance(field, pilots_, raw);
                const double a = opts_.csi_smoothing;
                if (!have_csi_) {
                    smoothed_csi_ = raw;
                    smoothed_sigma2_ = sigma2;
                    have_csi_ = true;
                } else {
                    for (int k = 0; k < kNumBeams; ++k) {
                        smoothed_csi_[k] = a * raw[k] + (1.0 - a) * smoothed_csi_[k];
                    }
                    smoothed_sigma2_ = a * sigma2 + (1.0 - a) * smoothed_sigma2_;
                }
                ++pilot_index_;
                history_.push_back({smoothed_csi_, pilot_index_, t0 + seg.offset, smoothed_sigma2_});
                while (history_.size() > static_cast<std::size_t>(std::max(opts_.diff_window, 2))) {
                    history_.pop_front();
                }
                if (history_.size() >= 2) {
                    const std::vector<ChannelEstimate> hist(history_.begin(), history_.end());
                    try {
                        last_differential_ =
                            estimate_differential(hist, opts_.symbol_rate, opts_.diff_window);
                    } catch (const Ambiguous&) {
                        // keep the previous estimate; offset beyond pilot-rate Nyquist
                    }
                }
                result.reports.push_back(make_report(t0 + seg.offset));
                break;
            }
            case SegmentType::P2: {
                FrameProgress& fp = progress_[seg.frame_index];
                fp.p2.insert(fp.p2.end(), rx.begin() + seg.offset, rx.begin() + seg.offset + seg.length);
                if (fp.p2.size() == static_cast<std::size_t>(layout_.p2_length)) {
                    const std::uint64_t frame_counter =
                        t0 / layout_.total_length() * layout_.frames_per_superframe +
                        seg.frame_index;
                    const SymbolBlock reference =
                        p2_reference(id_, frame_counter, layout_.p2_length);
                    const double sinr = estimate_sinr_p2(fp.p2, reference);
                    last_sinr_db_ = sinr;
                    const double a = opts_.sinr_smoothing;
                    smoothed_sinr_db_ = have_sinr_ ? a * sinr + (1.0 - a) * smoothed_sinr_db_ : sinr;
                    have_sinr_ = true;
                    result.instantaneous_sinr_db.push_back(sinr);
                }
                break;
            }
            case SegmentType::Data: {
                FrameProgress& fp = progress_[seg.frame_index];
                if (fp.data_symbols == 0) fp.start_symbol = t0 + seg.offset;
                fp.data_symbols += seg.length;
                if (fp.data_symbols == static_cast<std::size_t>(layout_.data_frame_length)) {
                    FrameRecord rec;
                    rec.t_symbol = fp.start_symbol;
                    rec.frame_index = seg.frame_index;
                    rec.sinr_db = have_sinr_ ? smoothed_sinr_db_ : -40.0;
                    const ModcodEntry* entry = table_.select(rec.sinr_db);
                    if (entry) {
                        rec.modcod_label = entry->label;
                        rec.outcome = {true, payload_bits_for(fp.data_symbols, *entry)};
                    }
                    result.frames.push_back(std::move(rec));
                }
                break;
            }
        }
    }
    return result;
}

}  // namespace satlink

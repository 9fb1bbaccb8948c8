#include "satlink/framing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "satlink/errors.hpp"
#include "satlink/noise.hpp"

namespace satlink {

namespace {

// Unit-modulus pilot scale; (1+i)/sqrt(2) so pilot chips sit on the QPSK circle.
const Complex kPilotScale{0.70710678118654752440, 0.70710678118654752440};

constexpr std::uint64_t kSosfSeedBase = 0x53463253494D0001ULL;  // fixed, beam-indexed
constexpr std::uint64_t kP2SeedBase = 0x5032534551000001ULL;

constexpr char kStreamMagic[8] = {'S', 'F', '2', 'S', 'I', 'M', '\0', '\0'};
constexpr std::uint32_t kStreamVersion = 1;

const std::array<Complex, 4>& qpsk_points() {
    static const std::array<Complex, 4> pts = {
        Complex{0.70710678118654752440, 0.70710678118654752440},    // 00
        Complex{0.70710678118654752440, -0.70710678118654752440},   // 01
        Complex{-0.70710678118654752440, 0.70710678118654752440},   // 10
        Complex{-0.70710678118654752440, -0.70710678118654752440},  // 11
    };
    return pts;
}

int gray_to_index(int gray) {
    int idx = gray;
    idx ^= idx >> 2;
    idx ^= idx >> 1;
    return idx;
}

int index_to_gray(int idx) { return idx ^ (idx >> 1); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

}  // namespace

double wh_chip(int row, int t) {
    return (std::popcount(static_cast<unsigned>(row & t)) & 1) ? -1.0 : 1.0;
}

int bits_per_symbol(Modulation m) { return m == Modulation::QPSK ? 2 : 3; }

const char* modulation_name(Modulation m) { return m == Modulation::QPSK ? "QPSK" : "8PSK"; }

int SuperframeLayout::pilot_field_count() const {
    const long long stream = static_cast<long long>(frames_per_superframe) * frame_length();
    const long long gap = pilot_spacing - pilot_field_length;
    if (gap <= 0 || stream % gap != 0) {
        throw LayoutOverflow("layout: frame stream does not tile the pilot gaps exactly");
    }
    return static_cast<int>(stream / gap);
}

std::size_t SuperframeLayout::total_length() const {
    return static_cast<std::size_t>(sosf_length) +
           static_cast<std::size_t>(pilot_field_count()) * pilot_spacing;
}

void SuperframeLayout::validate() const {
    if (pilot_field_length != 36) throw LayoutOverflow("layout: pilot field length is fixed at 36");
    if (p2_length != 180) throw LayoutOverflow("layout: P2 length is fixed at 180");
    if (sosf_length <= 0) throw LayoutOverflow("layout: SOSF length must be > 0");
    if (frames_per_superframe <= 0 || data_frame_length <= 0) {
        throw LayoutOverflow("layout: frame counts must be > 0");
    }
    pilot_field_count();  // tiling check
}

PilotSet build_pilot_set(int n_beams) {
    if (n_beams < 1 || n_beams > PilotSet::kCoreLength) {
        throw Error("build_pilot_set: n_beams must be in [1, 32]");
    }
    PilotSet set;
    set.n_beams = n_beams;
    set.sequences.resize(n_beams);
    for (int k = 0; k < n_beams; ++k) {
        SymbolBlock seq(36);
        for (int t = 0; t < PilotSet::kCoreLength; ++t) {
            seq[t] = kPilotScale * wh_chip(k, t);
        }
        for (int t = PilotSet::kCoreLength; t < 36; ++t) {
            seq[t] = seq[PilotSet::kCoreLength - 1];  // padding repeats the last chip
        }
        set.sequences[k] = std::move(seq);
    }
    return set;
}

SymbolBlock modulate(const std::vector<std::uint8_t>& bits, Modulation m) {
    const int bps = bits_per_symbol(m);
    if (bits.size() % bps != 0) {
        throw LengthMismatch("modulate: bit count not a multiple of bits per symbol");
    }
    SymbolBlock out(bits.size() / bps);
    if (m == Modulation::QPSK) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const int idx = (bits[2 * i] << 1) | bits[2 * i + 1];
            out[i] = qpsk_points()[idx];
        }
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const int gray = (bits[3 * i] << 2) | (bits[3 * i + 1] << 1) | bits[3 * i + 2];
            const int pos = gray_to_index(gray);
            out[i] = std::polar(1.0, kTwoPi * pos / 8.0);
        }
    }
    return out;
}

std::vector<std::uint8_t> demodulate(const SymbolBlock& symbols, Modulation m) {
    std::vector<std::uint8_t> bits;
    bits.reserve(symbols.size() * bits_per_symbol(m));
    if (m == Modulation::QPSK) {
        for (const Complex& s : symbols) {
            bits.push_back(s.real() < 0.0 ? 1 : 0);
            bits.push_back(s.imag() < 0.0 ? 1 : 0);
        }
    } else {
        for (const Complex& s : symbols) {
            int pos = static_cast<int>(std::lround(std::arg(s) / (kTwoPi / 8.0)));
            pos = ((pos % 8) + 8) % 8;
            const int gray = index_to_gray(pos);
            bits.push_back((gray >> 2) & 1);
            bits.push_back((gray >> 1) & 1);
            bits.push_back(gray & 1);
        }
    }
    return bits;
}

SymbolBlock make_sosf(int length, std::uint64_t seed) {
    SeededRng rng(seed);
    SymbolBlock out(length);
    for (auto& s : out) s = std::polar(1.0, kTwoPi * rng.uniform());
    return out;
}

BeamSequences make_beam_sequences(const SuperframeLayout& layout) {
    BeamSequences seq;
    for (int b = 0; b < kNumBeams; ++b) {
        seq.sosf[b] = make_sosf(layout.sosf_length, kSosfSeedBase + b);
    }
    return seq;
}

SymbolBlock p2_reference(int beam, std::uint64_t frame_counter, int length) {
    SeededRng rng(derive_seed(kP2SeedBase + beam, frame_counter));
    SymbolBlock p2(length);
    for (auto& s : p2) s = qpsk_points()[rng.bits() & 3];
    return p2;
}

std::vector<Segment> superframe_segment_map(const SuperframeLayout& layout) {
    layout.validate();
    std::vector<Segment> segs;
    segs.push_back({SegmentType::Sosf, 0, static_cast<std::size_t>(layout.sosf_length), false, -1});

    const int frame_len = layout.frame_length();
    std::size_t stream_pos = 0;  // position within the concatenated frame stream
    const int n_fields = layout.pilot_field_count();
    for (int k = 0; k < n_fields; ++k) {
        std::size_t base = layout.sosf_length + static_cast<std::size_t>(k) * layout.pilot_spacing;
        segs.push_back(
            {SegmentType::SfPilot, base, static_cast<std::size_t>(layout.pilot_field_length), false, -1});
        std::size_t pos = base + layout.pilot_field_length;
        std::size_t gap = layout.pilot_spacing - layout.pilot_field_length;
        while (gap > 0) {
            const int frame = static_cast<int>(stream_pos / frame_len);
            const std::size_t in_frame = stream_pos % frame_len;
            const bool is_p2 = in_frame < static_cast<std::size_t>(layout.p2_length);
            const std::size_t span_end = is_p2 ? layout.p2_length : frame_len;
            const std::size_t take = std::min(gap, span_end - in_frame);
            segs.push_back({is_p2 ? SegmentType::P2 : SegmentType::Data, pos, take, true, frame});
            pos += take;
            gap -= take;
            stream_pos += take;
        }
    }
    return segs;
}

Superframe build_superframe(const SuperframeLayout& layout, const PilotSet& pilots,
                            const BeamSequences& sequences,
                            const std::array<std::vector<std::uint8_t>, kNumBeams>& payload_bits,
                            std::uint64_t first_frame_counter) {
    layout.validate();
    if (pilots.n_beams < kNumBeams) throw Error("build_superframe: pilot set too small");
    const int bps = bits_per_symbol(layout.data_modulation);
    const std::size_t bits_needed = static_cast<std::size_t>(layout.frames_per_superframe) *
                                    layout.data_frame_length * bps;
    for (int b = 0; b < kNumBeams; ++b) {
        if (payload_bits[b].size() != bits_needed) {
            throw LayoutOverflow("build_superframe: payload bit count does not match layout");
        }
    }

    Superframe sf;
    sf.segments = superframe_segment_map(layout);
    const int frame_len = layout.frame_length();
    for (int f = 0; f < layout.frames_per_superframe; ++f) {
        sf.frames.push_back({layout.data_modulation,
                             static_cast<std::size_t>(layout.data_frame_length) * bps});
    }

    for (int b = 0; b < kNumBeams; ++b) {
        // Materialize the per-beam frame stream (P2 + data per frame), then
        // scatter it into the pilot gaps via the segment map.
        const SymbolBlock data = modulate(payload_bits[b], layout.data_modulation);
        SymbolBlock stream(static_cast<std::size_t>(layout.frames_per_superframe) * frame_len);
        for (int f = 0; f < layout.frames_per_superframe; ++f) {
            Complex* frame = stream.data() + static_cast<std::size_t>(f) * frame_len;
            const SymbolBlock p2 = p2_reference(b, first_frame_counter + f, layout.p2_length);
            std::copy(p2.begin(), p2.end(), frame);
            std::copy(data.begin() + static_cast<std::size_t>(f) * layout.data_frame_length,
                      data.begin() + static_cast<std::size_t>(f + 1) * layout.data_frame_length,
                      frame + layout.p2_length);
        }

        SymbolBlock& beam = sf.beams[b];
        beam.assign(layout.total_length(), Complex{});
        std::size_t stream_pos = 0;
        for (const Segment& seg : sf.segments) {
            switch (seg.type) {
                case SegmentType::Sosf:
                    std::copy(sequences.sosf[b].begin(), sequences.sosf[b].end(),
                              beam.begin() + seg.offset);
                    break;
                case SegmentType::SfPilot:
                    std::copy(pilots.sequences[b].begin(), pilots.sequences[b].end(),
                              beam.begin() + seg.offset);
                    break;
                case SegmentType::P2:
                case SegmentType::Data:
                    std::copy(stream.begin() + stream_pos, stream.begin() + stream_pos + seg.length,
                              beam.begin() + seg.offset);
                    stream_pos += seg.length;
                    break;
            }
        }
    }
    return sf;
}

std::vector<Segment> parse_superframe(const SymbolBlock& stream, const SuperframeLayout& layout,
                                      std::size_t sync_offset) {
    std::vector<Segment> segs = superframe_segment_map(layout);
    if (sync_offset + layout.total_length() > stream.size()) {
        throw OutOfBounds("parse_superframe: stream too short for layout at sync offset");
    }
    for (Segment& s : segs) s.offset += sync_offset;
    return segs;
}

double sosf_metric_at(const SymbolBlock& stream, const SymbolBlock& sosf, std::size_t offset) {
    const std::size_t n = sosf.size();
    if (offset + n > stream.size()) throw OutOfBounds("sosf_metric_at: window exceeds stream");
    Complex corr{};
    double power = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        corr += stream[offset + t] * std::conj(sosf[t]);
        power += std::norm(stream[offset + t]);
    }
    double ref = 0.0;
    for (const Complex& s : sosf) ref += std::norm(s);
    const double denom = std::sqrt(power * ref);
    return denom > 0.0 ? std::abs(corr) / denom : 0.0;
}

SosfDetection detect_sosf(const SymbolBlock& stream, const SymbolBlock& sosf, double threshold) {
    const std::size_t n = sosf.size();
    if (stream.size() < n) throw OutOfBounds("detect_sosf: stream shorter than the SOSF");

    // Rolling window power via prefix sums keeps the search O(N*L).
    std::vector<double> prefix(stream.size() + 1, 0.0);
    for (std::size_t t = 0; t < stream.size(); ++t) prefix[t + 1] = prefix[t] + std::norm(stream[t]);
    double ref = 0.0;
    for (const Complex& s : sosf) ref += std::norm(s);

    SosfDetection best;
    for (std::size_t off = 0; off + n <= stream.size(); ++off) {
        Complex corr{};
        for (std::size_t t = 0; t < n; ++t) corr += stream[off + t] * std::conj(sosf[t]);
        const double power = prefix[off + n] - prefix[off];
        const double denom = std::sqrt(power * ref);
        const double metric = denom > 0.0 ? std::abs(corr) / denom : 0.0;
        if (metric > best.metric) {
            best.metric = metric;
            best.offset = off;
        }
    }
    if (best.metric < threshold) {
        throw NoSync("detect_sosf: correlation peak below threshold");
    }
    return best;
}

void write_superframe_stream(const std::string& path, const SymbolBlock& stream,
                             const SuperframeLayout& layout) {
    std::string header(kStreamMagic, 8);
    put_u32(header, kStreamVersion);
    put_u32(header, static_cast<std::uint32_t>(layout.sosf_length));
    put_u32(header, static_cast<std::uint32_t>(layout.pilot_field_length));
    put_u32(header, static_cast<std::uint32_t>(layout.pilot_spacing));
    put_u32(header, static_cast<std::uint32_t>(layout.p2_length));
    put_u32(header, static_cast<std::uint32_t>(layout.frames_per_superframe));
    put_u32(header, static_cast<std::uint32_t>(layout.data_frame_length));
    put_u32(header, layout.data_modulation == Modulation::QPSK ? 0 : 1);
    put_u64(header, stream.size());
    header.resize(64, '\0');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("write_superframe_stream: cannot open " + path);
    out.write(header.data(), 64);
    std::string payload;
    payload.reserve(stream.size() * 16);
    for (const Complex& s : stream) {
        std::uint64_t re, im;
        double dre = s.real(), dim = s.imag();
        std::memcpy(&re, &dre, 8);
        std::memcpy(&im, &dim, 8);
        put_u64(payload, re);
        put_u64(payload, im);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error("write_superframe_stream: write failed for " + path);
}

std::pair<SymbolBlock, SuperframeLayout> read_superframe_stream(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_superframe_stream: cannot open " + path);
    char header[64];
    in.read(header, 64);
    if (!in || std::memcmp(header, kStreamMagic, 8) != 0) {
        throw Error("read_superframe_stream: bad magic");
    }
    if (get_u32(header + 8) != kStreamVersion) {
        throw Error("read_superframe_stream: unsupported version");
    }
    SuperframeLayout layout;
    layout.sosf_length = static_cast<int>(get_u32(header + 12));
    layout.pilot_field_length = static_cast<int>(get_u32(header + 16));
    layout.pilot_spacing = static_cast<int>(get_u32(header + 20));
    layout.p2_length = static_cast<int>(get_u32(header + 24));
    layout.frames_per_superframe = static_cast<int>(get_u32(header + 28));
    layout.data_frame_length = static_cast<int>(get_u32(header + 32));
    layout.data_modulation = get_u32(header + 36) == 0 ? Modulation::QPSK : Modulation::PSK8;
    const std::uint64_t count = get_u64(header + 40);

    SymbolBlock stream(count);
    std::vector<char> buf(count * 16);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw Error("read_superframe_stream: truncated payload");
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t re = get_u64(buf.data() + 16 * i);
        const std::uint64_t im = get_u64(buf.data() + 16 * i + 8);
        double dre, dim;
        std::memcpy(&dre, &re, 8);
        std::memcpy(&dim, &im, 8);
        stream[i] = {dre, dim};
    }
    return {std::move(stream), layout};
}

}  // namespace satlink

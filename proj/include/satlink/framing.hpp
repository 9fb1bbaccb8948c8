// Symbol-level superframe modeled on DVB-S2X format 2: SOSF, unprecoded
// Walsh-Hadamard SF-pilot fields, precoded P2 pilot blocks, and precoded data
// payload, with a per-segment precoding flag map shared by both beams.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "satlink/types.hpp"

namespace satlink {

enum class Modulation { QPSK, PSK8 };

int bits_per_symbol(Modulation m);
const char* modulation_name(Modulation m);

struct SuperframeLayout {
    int sosf_length = 270;
    int pilot_field_length = 36;  // 32 WH chips + 4 padding symbols, fixed
    int pilot_spacing = 1476;     // start-to-start distance of SF-pilot fields
    int p2_length = 180;          // fixed
    int frames_per_superframe = 16;
    int data_frame_length = 1260;  // data symbols per bundled frame (after P2)
    Modulation data_modulation = Modulation::QPSK;

    int frame_length() const { return p2_length + data_frame_length; }
    /// Number of SF-pilot fields needed to tile the frame stream exactly.
    /// Throws LayoutOverflow when the declared segments cannot tile.
    int pilot_field_count() const;
    std::size_t total_length() const;
    void validate() const;
};

struct PilotSet {
    static constexpr int kCoreLength = 32;  // WH chips used for correlation
    int n_beams = 0;
    std::vector<SymbolBlock> sequences;  // unit-modulus, pilot_field_length long
};

/// Walsh-Hadamard chip of `row` at position `t` (Sylvester order, row 0 is
/// all-ones): +1 or -1. Distinct rows cancel exactly at integer level.
double wh_chip(int row, int t);

/// Beam k carries Walsh-Hadamard row k scaled by (1+i)/sqrt(2) and padded to
/// 36 symbols by repeating the last chip.
PilotSet build_pilot_set(int n_beams);

enum class SegmentType { Sosf, SfPilot, P2, Data };

struct Segment {
    SegmentType type;
    std::size_t offset;
    std::size_t length;
    bool precoded;
    int frame_index;  // -1 for SOSF / SF-pilot segments
};

struct FrameDescriptor {
    Modulation modulation;
    std::size_t payload_bits;
};

struct Superframe {
    std::array<SymbolBlock, kNumBeams> beams;  // equal length, pilot-aligned
    std::vector<Segment> segments;             // one map, valid for both beams
    std::vector<FrameDescriptor> frames;
};

/// The segment map implied by a layout (offsets relative to superframe start).
std::vector<Segment> superframe_segment_map(const SuperframeLayout& layout);

/// Gray-mapped unit-modulus constellation symbols. Throws LengthMismatch when
/// the bit count is not a multiple of bits-per-symbol.
SymbolBlock modulate(const std::vector<std::uint8_t>& bits, Modulation m);

/// Nearest-point decisions, inverse of modulate at zero noise.
std::vector<std::uint8_t> demodulate(const SymbolBlock& symbols, Modulation m);

/// Pseudo-random unit-modulus sequence used as a start-of-superframe marker.
SymbolBlock make_sosf(int length, std::uint64_t seed);

/// Known per-beam reference sequences, fixed constants shared by gateway and
/// terminals.
struct BeamSequences {
    std::array<SymbolBlock, kNumBeams> sosf;
};
BeamSequences make_beam_sequences(const SuperframeLayout& layout);

/// Known P2 block for one bundled frame: QPSK symbols drawn deterministically
/// from (beam, absolute frame counter), so transmitter and receiver generate
/// the same reference independently and consecutive frames decorrelate.
SymbolBlock p2_reference(int beam, std::uint64_t frame_counter, int length);

/// Assemble both beams' superframes from per-beam payload bits; the embedded
/// P2 blocks start at `first_frame_counter`. SF-pilot fields occupy identical
/// offsets in both streams. Throws LayoutOverflow when payload sizes disagree
/// with the layout.
Superframe build_superframe(const SuperframeLayout& layout, const PilotSet& pilots,
                            const BeamSequences& sequences,
                            const std::array<std::vector<std::uint8_t>, kNumBeams>& payload_bits,
                            std::uint64_t first_frame_counter = 0);

/// Segment views of a received stream, offset by sync_offset. Throws
/// OutOfBounds when the stream is too short for the layout.
std::vector<Segment> parse_superframe(const SymbolBlock& stream, const SuperframeLayout& layout,
                                      std::size_t sync_offset);

struct SosfDetection {
    std::size_t offset = 0;
    double metric = 0.0;  // normalized correlation peak in [0, 1]
};

/// Peak of the normalized cross-correlation against the known SOSF. Throws
/// NoSync when the peak metric falls below the threshold.
SosfDetection detect_sosf(const SymbolBlock& stream, const SymbolBlock& sosf,
                          double threshold = 0.5);

/// Normalized correlation metric of the SOSF at one known offset (sync check).
double sosf_metric_at(const SymbolBlock& stream, const SymbolBlock& sosf, std::size_t offset);

// Flat binary stream file: 64-byte header (magic "SF2SIM\0\0", version,
// layout fields, sample count) followed by little-endian float64 (re, im)
// pairs. Used for golden-file tests.
void write_superframe_stream(const std::string& path, const SymbolBlock& stream,
                             const SuperframeLayout& layout);
std::pair<SymbolBlock, SuperframeLayout> read_superframe_stream(const std::string& path);

}  // namespace satlink

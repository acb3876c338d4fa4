#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "core/types.hpp"

namespace cansim {

// A CAN 2.0 data/remote frame at the payload level. `id` holds the full
// identifier: 11 bits when extended == false, 29 bits otherwise. For
// extended identifiers the final 8 bits name the sending ECU (J1939
// style source address); the IDS leans on that convention.
struct Frame {
    uint32_t id = 0;
    bool extended = true;
    bool rtr = false;
    uint8_t dlc = 0;  // 0..8
    std::array<uint8_t, 8> data{};

    uint8_t source() const { return static_cast<uint8_t>(id & 0xff); }
    bool operator==(const Frame&) const = default;
};

struct TaggedBit {
    BusLevel level;
    Field field;
    bool stuff;  // inserted by the stuffing rule, invisible after unstuffing
};

// Wire image of one frame: every bit tagged with exactly one field.
// Includes ACK slot (emitted recessive by a transmitter), EOF, and the
// three intermission bits.
struct FrameBits {
    std::vector<TaggedBit> bits;

    size_t size() const { return bits.size(); }
    // index one past the last EOF bit (== start of intermission)
    size_t eof_end() const { return bits.size() - 3; }
    std::vector<BusLevel> levels() const;
    size_t field_start(Field f) const;  // first index tagged f
    size_t field_count(Field f) const;
};

// --- CRC-15 ------------------------------------------------------------
// Generator x^15+x^14+x^10+x^8+x^7+x^4+x^3+1 (0x4599 truncated), the
// shift-register form. Runs over unstuffed bit values, SOF..end of data.

constexpr uint16_t kCrc15Poly = 0x4599;

inline uint16_t crc15_step(uint16_t crc, int bit) {
    uint16_t crcnxt = static_cast<uint16_t>((bit & 1) ^ ((crc >> 14) & 1));
    crc = static_cast<uint16_t>((crc << 1) & 0x7fff);
    if (crcnxt) crc ^= kCrc15Poly;
    return crc;
}

uint16_t crc15(const std::vector<BusLevel>& bits);

// --- bit stuffing --------------------------------------------------------
// After five equal consecutive levels the opposite level is inserted.
// Inserted bits count toward subsequent runs.

std::vector<BusLevel> stuff_bits(const std::vector<BusLevel>& raw);

struct UnstuffResult {
    std::vector<BusLevel> bits;
    // index (into the stuffed input) of a six-run violation, if any
    std::optional<size_t> violation;
};

UnstuffResult unstuff_bits(const std::vector<BusLevel>& stuffed);

// --- frame encoding ------------------------------------------------------

FrameBits encode_frame(const Frame& f);

// Number of wire bits from SOF through the last EOF bit (excludes
// intermission); used for utilization accounting.
size_t frame_wire_bits(const Frame& f);

}  // namespace cansim

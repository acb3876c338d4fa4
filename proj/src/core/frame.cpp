#include "core/frame.hpp"

#include <stdexcept>

namespace cansim {

std::vector<BusLevel> FrameBits::levels() const {
    std::vector<BusLevel> out;
    out.reserve(bits.size());
    for (const auto& b : bits) out.push_back(b.level);
    return out;
}

size_t FrameBits::field_start(Field f) const {
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i].field == f) return i;
    return bits.size();
}

size_t FrameBits::field_count(Field f) const {
    size_t n = 0;
    for (const auto& b : bits)
        if (b.field == f) ++n;
    return n;
}

uint16_t crc15(const std::vector<BusLevel>& bits) {
    uint16_t crc = 0;
    for (BusLevel b : bits) crc = crc15_step(crc, level_bit(b));
    return crc;
}

std::vector<BusLevel> stuff_bits(const std::vector<BusLevel>& raw) {
    std::vector<BusLevel> out;
    out.reserve(raw.size() + raw.size() / 5 + 1);
    int run = 0;
    BusLevel run_level = BusLevel::recessive;
    for (BusLevel b : raw) {
        if (run > 0 && b == run_level) {
            ++run;
        } else {
            run_level = b;
            run = 1;
        }
        out.push_back(b);
        if (run == 5) {
            run_level = opposite(run_level);
            run = 1;
            out.push_back(run_level);
        }
    }
    return out;
}

UnstuffResult unstuff_bits(const std::vector<BusLevel>& stuffed) {
    UnstuffResult r;
    r.bits.reserve(stuffed.size());
    int run = 0;
    BusLevel run_level = BusLevel::recessive;
    for (size_t i = 0; i < stuffed.size(); ++i) {
        BusLevel b = stuffed[i];
        bool stuff_expected = (run == 5);
        if (run > 0 && b == run_level) {
            ++run;
        } else {
            run_level = b;
            run = 1;
        }
        if (stuff_expected) {
            if (run >= 6) {  // stuff bit equal to the run: violation
                r.violation = i;
                return r;
            }
            continue;  // valid stuff bit, drop it
        }
        if (run >= 6) {
            r.violation = i;
            return r;
        }
        r.bits.push_back(b);
    }
    return r;
}

namespace {

void push_value(std::vector<TaggedBit>& v, uint32_t value, int width, Field f) {
    for (int i = width - 1; i >= 0; --i)
        v.push_back({level_from_bit((value >> i) & 1), f, false});
}

void push_level(std::vector<TaggedBit>& v, BusLevel l, Field f) {
    v.push_back({l, f, false});
}

}  // namespace

FrameBits encode_frame(const Frame& f) {
    if (f.dlc > 8) throw std::invalid_argument("dlc out of range");
    if (!f.extended && f.id > 0x7ff) throw std::invalid_argument("standard id out of range");
    if (f.extended && f.id > 0x1fffffff) throw std::invalid_argument("extended id out of range");

    std::vector<TaggedBit> body;
    push_level(body, BusLevel::dominant, Field::Sof);

    if (f.extended) {
        push_value(body, (f.id >> 18) & 0x7ff, 11, Field::Arbitration);  // base id
        push_level(body, BusLevel::recessive, Field::Arbitration);       // SRR
        push_level(body, BusLevel::recessive, Field::Arbitration);       // IDE
        push_value(body, f.id & 0x3ffff, 18, Field::Arbitration);        // extension
        push_level(body, f.rtr ? BusLevel::recessive : BusLevel::dominant, Field::Arbitration);
        push_level(body, BusLevel::dominant, Field::Control);  // r1
        push_level(body, BusLevel::dominant, Field::Control);  // r0
    } else {
        push_value(body, f.id & 0x7ff, 11, Field::Arbitration);
        push_level(body, f.rtr ? BusLevel::recessive : BusLevel::dominant, Field::Arbitration);
        push_level(body, BusLevel::dominant, Field::Arbitration);  // IDE
        push_level(body, BusLevel::dominant, Field::Control);      // r0
    }
    push_value(body, f.dlc, 4, Field::Control);

    int nbytes = f.rtr ? 0 : f.dlc;
    for (int i = 0; i < nbytes; ++i) push_value(body, f.data[i], 8, Field::Data);

    std::vector<BusLevel> crc_input;
    crc_input.reserve(body.size());
    for (const auto& b : body) crc_input.push_back(b.level);
    uint16_t crc = crc15(crc_input);
    push_value(body, crc, 15, Field::Crc);

    // stuff SOF..CRC, tagging inserted bits with the field they follow
    FrameBits out;
    out.bits.reserve(body.size() + body.size() / 5 + 16);
    int run = 0;
    BusLevel run_level = BusLevel::recessive;
    for (const auto& tb : body) {
        if (run > 0 && tb.level == run_level) {
            ++run;
        } else {
            run_level = tb.level;
            run = 1;
        }
        out.bits.push_back(tb);
        if (run == 5) {
            run_level = opposite(run_level);
            run = 1;
            out.bits.push_back({run_level, tb.field, true});
        }
    }

    push_level(out.bits, BusLevel::recessive, Field::CrcDelim);
    push_level(out.bits, BusLevel::recessive, Field::AckSlot);  // transmitter emits recessive
    push_level(out.bits, BusLevel::recessive, Field::AckDelim);
    for (int i = 0; i < 7; ++i) push_level(out.bits, BusLevel::recessive, Field::Eof);
    for (int i = 0; i < 3; ++i) push_level(out.bits, BusLevel::recessive, Field::Intermission);
    return out;
}

size_t frame_wire_bits(const Frame& f) {
    return encode_frame(f).eof_end();
}

}  // namespace cansim

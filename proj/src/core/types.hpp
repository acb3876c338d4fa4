#pragma once

#include <cstdint>
#include <string>

namespace cansim {

// Wire levels. CAN is a wired-AND medium: dominant (0) overrides
// recessive (1). An undriven bus floats recessive.
enum class BusLevel : uint8_t { dominant = 0, recessive = 1 };

inline BusLevel level_from_bit(int b) {
    return b ? BusLevel::recessive : BusLevel::dominant;
}
inline int level_bit(BusLevel l) { return l == BusLevel::recessive ? 1 : 0; }
inline BusLevel opposite(BusLevel l) {
    return l == BusLevel::recessive ? BusLevel::dominant : BusLevel::recessive;
}

// Error classes a controller can raise. When several checks trip on the
// same bit we report the highest-priority one, in this order.
enum class ErrorKind : uint8_t {
    BitMonitoring,  // transmitter saw a level it did not drive
    Stuff,          // six equal bits inside the stuffed region
    Form,           // dominant level in a fixed recessive field
    Crc,            // CRC mismatch at the CRC delimiter
    Ack,            // no dominant bit in the ACK slot
};

const char* error_kind_name(ErrorKind k);

// Frame fields in wire order. Intermission is bookkept as part of the
// frame so that every bit of a framed transmission has exactly one tag.
enum class Field : uint8_t {
    Sof,
    Arbitration,
    Control,
    Data,
    Crc,
    CrcDelim,
    AckSlot,
    AckDelim,
    Eof,
    Intermission,
};

const char* field_name(Field f);

// Fault-confinement mode derived from the transmit error counter.
enum class EcuMode : uint8_t { error_active, error_passive, bus_off };

const char* ecu_mode_name(EcuMode m);

}  // namespace cansim

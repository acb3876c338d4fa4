#pragma once

#include <algorithm>

#include "core/types.hpp"

namespace cansim {

// Transmit/receive error counter with the simplified fault-confinement
// arithmetic: +8 per error or interruption, -1 per good frame (floor 0).
// In resistant-flag mode an error only charges +8 when the previous
// error lies at least 6 clean bits in the past; the countdown is the
// `last_error` field.
struct ErrorCounter {
    int value = 0;
    bool resistant = false;  // gate increments through last_error
    int last_error = 0;      // bits remaining until the next chargeable error

    // Returns true when the +8 was actually applied.
    bool on_error() {
        bool charged = true;
        if (resistant) {
            charged = last_error <= 0;
            if (charged) value += 8;
            last_error = 6;
        } else {
            value += 8;
        }
        return charged;
    }

    // One bit elapsed without an error event.
    void on_clean_bit() {
        if (last_error > 0) --last_error;
    }

    void on_good_frame() { value = std::max(0, value - 1); }

    bool passive() const { return value > 127; }
    bool off() const { return value > 255; }
};

inline EcuMode mode_of(const ErrorCounter& tec) {
    if (tec.off()) return EcuMode::bus_off;
    if (tec.passive()) return EcuMode::error_passive;
    return EcuMode::error_active;
}

}  // namespace cansim

#pragma once

#include <cstdint>
#include <vector>

#include "core/frame.hpp"
#include "core/types.hpp"

namespace cansim {

// Incremental receiver-side frame decoder. Feed it one resolved wire
// level per tick; it unstuffs, walks the field layout, runs the
// receive checks (stuff, form, CRC, optional ACK) and reports either a
// completed frame or the first error with the kind an ECU would raise
// at that bit.
//
// The decoder knows nothing about error frames or intermission
// spacing; the owning node stops feeding it (and resets it) when error
// signaling takes over, and decides when a dominant bit counts as SOF.
// While idle, a dominant bit starts a frame and is consumed as SOF; a
// recessive bit is ignored.
class FrameDecoder {
  public:
    enum class Event : uint8_t { none, error, complete };

    struct Step {
        Event event = Event::none;
        ErrorKind error = ErrorKind::Stuff;  // meaningful when event == error
        bool stuff_bit = false;              // the fed bit was a stuff bit
    };

    FrameDecoder() { reset(); }

    void reset();
    Step feed(BusLevel bit);

    bool in_frame() const { return in_frame_; }
    Field field() const { return field_; }

    // True when the next bit to be fed is the ACK slot of a frame whose
    // CRC already checked out: a receiver drives dominant there.
    bool ack_due_next() const { return in_frame_ && field_ == Field::AckSlot; }

    // When true, a recessive ACK slot raises Ack instead of being
    // accepted. Off by default so pure decode round-trips transmitter
    // output (recessive slot).
    void set_require_ack(bool v) { require_ack_ = v; }

    const Frame& frame() const { return frame_; }  // valid after complete
    BusLevel ack_level() const { return ack_level_; }

    // identifier bits observed so far, SRR/IDE excluded (11 or 11+18)
    const std::vector<uint8_t>& id_prefix_bits() const { return id_prefix_; }
    bool id_complete() const { return id_complete_; }
    uint32_t id_value() const { return id_; }
    bool extended() const { return extended_; }
    bool rtr() const { return rtr_; }
    uint8_t dlc() const { return dlc_; }

    // progress and stuffing state, for consumers that predict the wire
    int unstuffed_in_field() const { return field_progress_; }
    int data_bits_total() const { return data_len_ * 8; }
    uint16_t crc_register() const { return crc_; }
    bool next_is_stuff() const { return in_frame_ && stuffed_ && run_len_ == 5; }
    BusLevel run_level() const { return run_level_; }
    int run_len() const { return run_len_; }

  private:
    Step fail(Step st, ErrorKind k);
    Step content_bit(BusLevel bit, Step st);
    Step tail_bit(BusLevel bit, Step st);

    bool in_frame_ = false;
    bool require_ack_ = false;
    Field field_ = Field::Sof;
    int field_progress_ = 0;

    bool stuffed_ = true;
    bool crc_done_ = false;
    BusLevel run_level_ = BusLevel::recessive;
    int run_len_ = 0;

    std::vector<uint8_t> arb_bits_;
    std::vector<uint8_t> id_prefix_;
    bool id_complete_ = false;
    bool extended_ = false;
    bool rtr_ = false;
    uint32_t id_ = 0;
    uint8_t dlc_ = 0;
    int data_len_ = 0;
    int ctrl_need_ = 0;
    std::vector<uint8_t> ctrl_bits_;

    uint16_t crc_ = 0;
    uint16_t crc_received_ = 0;
    int crc_bits_ = 0;
    int eof_count_ = 0;
    BusLevel ack_level_ = BusLevel::recessive;

    Frame frame_;
};

struct DecodeOutcome {
    bool ok = false;
    Frame frame;
    ErrorKind error = ErrorKind::Stuff;
    size_t position = 0;  // wire-bit index of the error
};

// Batch wrapper over FrameDecoder: bits must begin at SOF.
DecodeOutcome decode_stream(const std::vector<BusLevel>& bits, bool require_ack = false);

}  // namespace cansim

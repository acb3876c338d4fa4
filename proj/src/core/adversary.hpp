#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/bus.hpp"
#include "core/decoder.hpp"
#include "core/frame.hpp"

namespace cansim {

// Wire offset (relative to SOF) of the first recessive non-stuff bit in
// the data field of the given template: the canonical spot to force a
// dominant level without tripping the stuffing rule first.
size_t traditional_attack_offset(const Frame& f);

// Shared bookkeeping: observed wire run and a shadow decoder that stays
// out of the way after an error until the bus has been idle long enough.
class AttackerBase : public AdversaryNode {
  public:
    void on_bit(BusContext& ctx, BusLevel resolved) override;

  protected:
    // called after run/decoder bookkeeping with the resolved level
    virtual void observe(BusContext& ctx, BusLevel resolved) = 0;
    void feed_shadow(BusLevel resolved);

    FrameDecoder dec_;
    bool realign_ = false;  // decoder lost the frame; wait for 11 idle bits
    bool feed_enabled_ = true;
    FrameDecoder::Step last_step_;

    BusLevel run_level_ = BusLevel::recessive;
    int run_len_ = 0;
    int rec_run_ = 0;  // consecutive recessive bits
    uint64_t now_ = 0;
};

// One dominant bit per cycle into the victim's data field, every Nth
// victim frame start. The +8 / -1 arithmetic on the victim follows from
// the pace alone.
class TraditionalAttacker : public AttackerBase {
  public:
    struct Config {
        Frame victim;       // full template, wire image known a priori
        uint32_t pace = 1;  // attack every Nth observed start
    };
    explicit TraditionalAttacker(const Config& cfg);

    const char* name() const override { return "trad"; }
    int8_t driven() const override { return drive_; }

    uint64_t attacks_launched = 0;
    uint64_t victim_starts_seen = 0;

  private:
    void observe(BusContext& ctx, BusLevel resolved) override;

    Config cfg_;
    size_t attack_off_;
    int8_t drive_ = kDriveSilent;
    bool armed_ = false;       // attack this frame
    bool done_frame_ = false;  // already fired in this frame
    uint64_t frame_bits_ = 0;  // bits consumed since SOF
    bool counting_ = false;
    bool id_checked_ = false;
    bool in_victim_frame_ = false;
};

// Full-knowledge single-message attacker: kicks the victim into error
// signaling inside its own data field, then keeps interrupting so every
// flag restarts, mirroring the victim's counter from observed outcomes.
// All interference stays stuffing-legal, so a receiver never sees an
// error; at q=1 it finishes the frame so the bus observes nothing at all.
class StealthyAttacker : public AttackerBase {
  public:
    struct Config {
        Frame victim;            // template (payload known a priori)
        uint64_t horizon = 0;    // 0: run until scenario stops
    };
    explicit StealthyAttacker(const Config& cfg);

    const char* name() const override { return "stealthy"; }
    int8_t driven() const override { return drive_; }
    FlipKind flip_request() const override { return flip_; }

    enum class Phase : uint8_t {
        watch,     // waiting for the victim's frame
        kickoff,   // flipping dominant data bits until one lands
        dance,     // interrupting active flags with to-recessive flips
        pump,      // overwriting passive flags with dominant bits
        finish,    // victim is off; complete the frame so receivers deliver
        drive_on,  // resistant victim detected; keep interrupting
        done,
    };
    Phase phase() const { return phase_; }
    int mirror() const { return mirror_; }
    bool victim_off() const { return mirror_ > 255; }
    bool eref_detected() const { return eref_detected_; }
    bool gave_up() const { return gave_up_; }
    bool finished_frame() const { return finished_frame_; }
    bool desynced() const { return desynced_; }
    uint64_t rescues() const { return rescues_; }
    const std::string& failure_reason() const { return failure_reason_; }

  private:
    void observe(BusContext& ctx, BusLevel resolved) override;
    void set_quiet();
    void to_flag_restart_mode();
    void note(BusContext& ctx, const char* label);

    Config cfg_;
    FrameBits tmpl_;
    int8_t drive_ = kDriveSilent;
    FlipKind flip_ = FlipKind::none;

    Phase phase_ = Phase::watch;
    bool counting_ = false;
    bool id_checked_ = false;
    bool in_victim_frame_ = false;
    uint64_t frame_bits_ = 0;
    bool prev_in_frame_ = false;
    Field prev_field_ = Field::Sof;

    int mirror_ = 0;      // mirrored victim tec
    int vflag_ = 0;       // victim's current flag progress, from the wire
    bool rescue_pending_ = false;
    bool skip_bit_ = false;       // we deliberately left this bit alone
    bool pump_driven_ = false;    // we drove dominant this bit
    bool flip_armed_ = false;     // we requested a flip for this bit
    bool desynced_ = false;
    bool finished_frame_ = false;
    bool eref_detected_ = false;
    bool gave_up_ = false;
    uint64_t rescues_ = 0;
    std::string failure_reason_;
};

// Bit-level sync then blind injection: two toggle flips seven bits
// apart collapse every bus state onto a known frame-start boundary 25
// bits after the first flip; the payload is then written blind.
class BlindSyncAttacker : public AttackerBase {
  public:
    struct Config {
        Frame payload;
        uint64_t start_bit = 0;
        bool synced = true;  // false: skip the sync prefix, write at start_bit
    };
    explicit BlindSyncAttacker(const Config& cfg);

    const char* name() const override { return "blind"; }
    int8_t driven() const override { return drive_; }
    FlipKind flip_request() const override { return flip_; }

    static constexpr uint64_t kSecondFlip = 7;   // offset of the second flip
    static constexpr uint64_t kInjectAt = 25;    // frame-start offset

    bool injection_started() const { return inject_pos_ > 0; }
    bool injection_complete() const { return done_; }

  private:
    void observe(BusContext& ctx, BusLevel resolved) override;

    Config cfg_;
    FrameBits payload_bits_;
    int8_t drive_ = kDriveSilent;
    FlipKind flip_ = FlipKind::none;
    size_t inject_pos_ = 0;
    bool injecting_ = false;
    bool done_ = false;
};

// Drives one frame itself, forces a dominant into its EOF so every
// receiver registers a form error, then keeps their error signaling
// alive: active flag bits are erased, passive flag bits are overwritten
// with dominants, one interruption per hit. Standard counters charge 8
// per interruption, so the receivers fall through error-passive into the
// silenced state, after which the frame is driven again and delivered.
// Resistant counters never recharge inside the episode; those receivers
// keep signaling and the attacker stays in the interrupt loop until the
// scenario ends. Deterministic at q = 1 with a receiver-only roster.
class CascadeAttacker : public AttackerBase {
  public:
    struct Config {
        Frame frame;
        uint64_t start_bit = 11;
        uint64_t gap_bits = 20;  // quiet stretch before the replay
    };
    explicit CascadeAttacker(const Config& cfg);

    const char* name() const override { return "cascade"; }
    int8_t driven() const override { return drive_; }
    FlipKind flip_request() const override { return flip_; }

    enum class Phase : uint8_t { wait, drive, settle, kick, dance, pump, cool, done };
    Phase phase() const { return phase_; }
    bool resistant_seen() const { return resistant_seen_; }
    bool replay_complete() const { return replay_complete_; }
    uint64_t interruptions = 0;

  private:
    enum class Sub : uint8_t { hit, gap, read };

    void observe(BusContext& ctx, BusLevel resolved) override;

    Config cfg_;
    FrameBits plan_;
    size_t eof_start_ = 0;
    int8_t drive_ = kDriveSilent;
    FlipKind flip_ = FlipKind::none;

    Phase phase_ = Phase::wait;
    Sub sub_ = Sub::hit;
    bool corrupt_pass_ = true;
    size_t plan_pos_ = 0;
    int reads_ = 0;
    int pump_left_ = 0;
    uint64_t cool_left_ = 0;
    bool resistant_seen_ = false;
    bool replay_complete_ = false;
};

// Drives the whole bus: frames from an emulation table, gaps between
// them, and a to-recessive flip on every bit that should be recessive,
// erasing foreign dominants (resistant-mode flags, IDS probes).
class DriveBusAttacker : public AttackerBase {
  public:
    struct Config {
        std::vector<Frame> table;   // round-robin emulation
        uint64_t gap_bits = 20;     // idle gap after intermission
        uint64_t start_bit = 11;
    };
    explicit DriveBusAttacker(const Config& cfg);

    const char* name() const override { return "driver"; }
    int8_t driven() const override { return drive_; }
    FlipKind flip_request() const override { return flip_; }

    uint64_t frames_emulated = 0;
    uint64_t corrupted_bits = 0;  // expected recessive resolved dominant

  private:
    void observe(BusContext& ctx, BusLevel resolved) override;
    void advance_plan();

    Config cfg_;
    int8_t drive_ = kDriveSilent;
    FlipKind flip_ = FlipKind::none;
    BusLevel expected_ = BusLevel::recessive;
    bool tolerate_dominant_ = false;  // ACK slot of an emulated frame

    size_t table_pos_ = 0;
    FrameBits cur_;
    size_t cur_pos_ = 0;
    bool in_frame_plan_ = false;
    bool started_ = false;
    uint64_t gap_left_ = 0;
};

}  // namespace cansim

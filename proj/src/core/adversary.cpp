#include "core/adversary.hpp"

#include <cassert>

namespace cansim {

size_t traditional_attack_offset(const Frame& f) {
    FrameBits fb = encode_frame(f);
    for (size_t i = 0; i < fb.size(); ++i) {
        const TaggedBit& tb = fb.bits[i];
        if (tb.field == Field::Data && !tb.stuff && tb.level == BusLevel::recessive)
            return i;
    }
    return 0;
}

// ---------------------------------------------------------------- base --

void AttackerBase::on_bit(BusContext& ctx, BusLevel resolved) {
    now_ = ctx.bit;
    if (resolved == run_level_) {
        run_len_ += 1;
    } else {
        run_level_ = resolved;
        run_len_ = 1;
    }
    rec_run_ = resolved == BusLevel::recessive ? rec_run_ + 1 : 0;
    feed_shadow(resolved);
    observe(ctx, resolved);
}

void AttackerBase::feed_shadow(BusLevel resolved) {
    last_step_ = FrameDecoder::Step{};
    if (!feed_enabled_) return;
    if (realign_) {
        // a lost decoder waits for a full idle gap before rearming
        if (rec_run_ >= 11) {
            realign_ = false;
            dec_.reset();
        }
        return;
    }
    last_step_ = dec_.feed(resolved);
    if (last_step_.event == FrameDecoder::Event::error) realign_ = true;
}

// --------------------------------------------------------- traditional --

TraditionalAttacker::TraditionalAttacker(const Config& cfg)
    : cfg_(cfg), attack_off_(traditional_attack_offset(cfg.victim)) {
    assert(cfg.pace >= 1);
    assert(attack_off_ != 0 && "victim template needs a recessive data bit");
}

void TraditionalAttacker::observe(BusContext& ctx, BusLevel) {
    drive_ = kDriveSilent;
    if (realign_ || !dec_.in_frame()) {
        counting_ = false;
        in_victim_frame_ = false;
        return;
    }
    if (!counting_) {
        counting_ = true;
        frame_bits_ = 0;
        id_checked_ = false;
        in_victim_frame_ = false;
        done_frame_ = false;
    }
    frame_bits_ += 1;
    if (!id_checked_ && dec_.id_complete()) {
        id_checked_ = true;
        if (dec_.id_value() == cfg_.victim.id && dec_.extended() == cfg_.victim.extended) {
            in_victim_frame_ = true;
            victim_starts_seen += 1;
            armed_ = ((victim_starts_seen - 1) % cfg_.pace) == 0;
        }
    }
    if (in_victim_frame_ && armed_ && !done_frame_ && frame_bits_ == attack_off_) {
        drive_ = kDriveDominant;  // lands exactly on the target wire offset
        done_frame_ = true;
        attacks_launched += 1;
        Annotation a;
        a.kind = AnnKind::attack;
        a.id = cfg_.victim.id;
        a.label = "force-dominant";
        ctx.annotate(a);
    }
}

// ------------------------------------------------------------ stealthy --

StealthyAttacker::StealthyAttacker(const Config& cfg)
    : cfg_(cfg), tmpl_(encode_frame(cfg.victim)) {
    assert(cfg.victim.dlc >= 1 && !cfg.victim.rtr);
}

void StealthyAttacker::set_quiet() {
    drive_ = kDriveSilent;
    flip_ = FlipKind::none;
}

void StealthyAttacker::note(BusContext& ctx, const char* label) {
    Annotation a;
    a.kind = AnnKind::attack;
    a.id = cfg_.victim.id;
    a.label = label;
    ctx.annotate(a);
}

void StealthyAttacker::observe(BusContext& ctx, BusLevel resolved) {
    bool was_flip = flip_armed_;
    bool was_skip = skip_bit_;
    bool was_pump = pump_driven_;
    bool was_rescue = rescue_pending_;
    flip_armed_ = skip_bit_ = pump_driven_ = rescue_pending_ = false;

    if (!desynced_ && phase_ != Phase::watch && phase_ != Phase::done &&
        last_step_.event == FrameDecoder::Event::error) {
        // the wire stopped looking like frame content (a completed flag
        // slipped through); the observers lost the frame the same way
        desynced_ = true;
    }

    // ---- interpret the current bit ----
    switch (phase_) {
        case Phase::watch: {
            if (realign_ || !dec_.in_frame()) {
                counting_ = false;
                in_victim_frame_ = false;
                break;
            }
            if (!counting_) {
                counting_ = true;
                frame_bits_ = 0;
                id_checked_ = false;
                in_victim_frame_ = false;
            }
            frame_bits_ += 1;
            if (!id_checked_ && dec_.id_complete()) {
                id_checked_ = true;
                in_victim_frame_ = dec_.id_value() == cfg_.victim.id &&
                                   dec_.extended() == cfg_.victim.extended;
            }
            if (in_victim_frame_ && dec_.field() == Field::Data &&
                dec_.unstuffed_in_field() == 0) {
                phase_ = Phase::kickoff;  // the data region starts next bit
                note(ctx, "armed");
            }
            break;
        }

        case Phase::kickoff: {
            frame_bits_ += 1;
            if (was_flip && resolved == BusLevel::recessive) {
                // the victim transmitted dominant, monitored recessive
                mirror_ += 8;
                vflag_ = 0;
                phase_ = Phase::dance;
                note(ctx, "kickoff");
            }
            break;
        }

        case Phase::dance:
        case Phase::drive_on: {
            if (was_rescue) {
                // our dominant hit the victim's fresh delimiter
                mirror_ += 8;
                rescues_ += 1;
                vflag_ = 0;
                note(ctx, "rescue");
            } else if (was_flip) {
                if (resolved == BusLevel::recessive) {
                    mirror_ += 8;  // flag bit erased: the victim restarts
                    vflag_ = 0;
                } else {
                    vflag_ += 1;  // flip failed, the flag bit stood
                }
            } else if (was_skip) {
                vflag_ += 1;  // we let the flag bit fill a stuff slot
            }
            if (phase_ == Phase::dance && mirror_ > 127) {
                phase_ = Phase::pump;
                note(ctx, "victim-passive");
            }
            break;
        }

        case Phase::pump: {
            if (was_pump) {
                mirror_ += 8;  // dominant over a passive flag, always lands
                if (mirror_ > 255) {
                    note(ctx, "victim-off");
                    if (!desynced_ && dec_.in_frame() && dec_.field() == Field::Data) {
                        phase_ = Phase::finish;
                    } else {
                        phase_ = Phase::done;  // frame unfinishable; stay quiet
                    }
                }
            } else if (was_skip && resolved == BusLevel::dominant) {
                // a passive victim would have yielded a recessive flag bit
                // here; an active flag at this point means the counter never
                // moved: the victim is running the resistant variant
                eref_detected_ = true;
                gave_up_ = true;
                failure_reason_ = "victim error-resistant: counter pinned, driving on";
                vflag_ = 6;  // its flag just completed; rescue follows
                phase_ = Phase::drive_on;
                note(ctx, "resistant-detected");
            }
            break;
        }

        case Phase::finish: {
            if (last_step_.event == FrameDecoder::Event::complete) {
                finished_frame_ = true;
                phase_ = Phase::done;
                note(ctx, "frame-finished");
            }
            break;
        }

        case Phase::done:
            break;
    }

    // budget: run out of data field while the victim is still error-active
    // and the attack cannot be hidden any more
    bool data_ended = !desynced_ && prev_in_frame_ && prev_field_ == Field::Data &&
                      dec_.in_frame() && dec_.field() == Field::Crc;
    if (data_ended && (phase_ == Phase::kickoff || phase_ == Phase::dance) &&
        mirror_ < 128) {
        gave_up_ = true;
        failure_reason_ = "interference budget exhausted inside the data field";
        phase_ = Phase::done;
        note(ctx, "abort");
    }
    prev_in_frame_ = dec_.in_frame();
    prev_field_ = dec_.field();

    // ---- decide the next bit ----
    set_quiet();
    switch (phase_) {
        case Phase::watch:
        case Phase::done:
            break;

        case Phase::kickoff: {
            if (frame_bits_ < tmpl_.size()) {
                const TaggedBit& nb = tmpl_.bits[frame_bits_];
                // flip dominant payload bits; dominant stuff bits sit after
                // five recessives and erasing one would fake a stuff error
                if (nb.field == Field::Data && !nb.stuff &&
                    nb.level == BusLevel::dominant) {
                    flip_ = FlipKind::to_recessive;
                    flip_armed_ = true;
                }
            }
            break;
        }

        case Phase::dance:
        case Phase::drive_on: {
            if (vflag_ >= 6) {
                drive_ = kDriveDominant;  // hit the delimiter, restart the flag
                rescue_pending_ = true;
            } else if (rec_run_ >= 5) {
                skip_bit_ = true;  // stuff slot: the flag bit must stand
            } else {
                flip_ = FlipKind::to_recessive;
                flip_armed_ = true;
            }
            break;
        }

        case Phase::pump: {
            if (run_level_ == BusLevel::dominant && run_len_ >= 5) {
                skip_bit_ = true;  // stuff slot: let one flag bit through
            } else {
                drive_ = kDriveDominant;
                pump_driven_ = true;
            }
            break;
        }

        case Phase::finish: {
            if (desynced_) {
                phase_ = Phase::done;
                break;
            }
            if (dec_.next_is_stuff()) {
                drive_ = dec_.run_level() == BusLevel::dominant ? kDriveRecessive
                                                                : kDriveDominant;
            } else {
                switch (dec_.field()) {
                    case Field::Data:
                        drive_ = kDriveRecessive;
                        break;
                    case Field::Crc: {
                        int idx = dec_.unstuffed_in_field();
                        int b = (dec_.crc_register() >> (14 - idx)) & 1;
                        drive_ = b ? kDriveRecessive : kDriveDominant;
                        break;
                    }
                    case Field::AckSlot:
                        drive_ = kDriveDominant;
                        break;
                    default:  // CrcDelim, AckDelim, Eof
                        drive_ = kDriveRecessive;
                        break;
                }
            }
            break;
        }
    }
}

// ----------------------------------------------------------- blind sync --

BlindSyncAttacker::BlindSyncAttacker(const Config& cfg)
    : cfg_(cfg), payload_bits_(encode_frame(cfg.payload)) {
    assert(cfg.start_bit >= 1);
}

void BlindSyncAttacker::observe(BusContext& ctx, BusLevel) {
    drive_ = kDriveSilent;
    flip_ = FlipKind::none;
    if (done_) return;

    uint64_t next = ctx.bit + 1;
    if (cfg_.synced) {
        if (next == cfg_.start_bit || next == cfg_.start_bit + kSecondFlip) {
            flip_ = FlipKind::toggle;
            Annotation a;
            a.kind = AnnKind::attack;
            a.label = "sync-flip";
            ctx.annotate(a);
        }
        if (next == cfg_.start_bit + kInjectAt) {
            injecting_ = true;
            inject_pos_ = 0;
        }
    } else if (next == cfg_.start_bit) {
        injecting_ = true;
        inject_pos_ = 0;
    }

    if (injecting_) {
        if (inject_pos_ == 0) {
            Annotation a;
            a.kind = AnnKind::attack;
            a.id = cfg_.payload.id;
            a.label = "inject";
            ctx.annotate(a);
        }
        const TaggedBit& tb = payload_bits_.bits[inject_pos_];
        drive_ = tb.level == BusLevel::dominant ? kDriveDominant : kDriveRecessive;
        inject_pos_ += 1;
        if (inject_pos_ >= payload_bits_.eof_end()) {
            injecting_ = false;  // release the bus at EOF
            done_ = true;
        }
    }
}

// ------------------------------------------------------------ drive bus --

// ------------------------------------------------------------- cascade --

CascadeAttacker::CascadeAttacker(const Config& cfg) : cfg_(cfg) {
    assert(cfg.start_bit >= 1);
    plan_ = encode_frame(cfg_.frame);
    eof_start_ = plan_.field_start(Field::Eof);
    feed_enabled_ = false;  // plan walking is positional, no decoder needed
}

void CascadeAttacker::observe(BusContext&, BusLevel resolved) {
    drive_ = kDriveSilent;
    flip_ = FlipKind::none;
    switch (phase_) {
        case Phase::wait:
            if (now_ + 1 < cfg_.start_bit) return;
            phase_ = Phase::drive;
            plan_pos_ = 0;
            [[fallthrough]];

        case Phase::drive:
            if (corrupt_pass_ && plan_pos_ == eof_start_) {
                drive_ = kDriveDominant;  // the form violation
                phase_ = Phase::settle;
                return;
            }
            if (plan_.bits[plan_pos_].level == BusLevel::dominant)
                drive_ = kDriveDominant;
            plan_pos_ += 1;
            if (plan_pos_ >= plan_.size()) {
                replay_complete_ = true;
                phase_ = Phase::done;
            }
            return;

        case Phase::settle:
            // one recessive bit: the receivers start counting delimiter bits
            phase_ = Phase::kick;
            return;

        case Phase::kick:
            // a dominant inside the delimiter count restarts every flag
            drive_ = kDriveDominant;
            interruptions += 1;
            phase_ = Phase::dance;
            sub_ = Sub::hit;
            return;

        case Phase::dance:
            // erase a flag bit, then leave one bit alone and read it: a
            // dominant is a flag still being driven, the first recessive
            // read means the flags went passive
            switch (sub_) {
                case Sub::hit:
                    flip_ = FlipKind::to_recessive;
                    interruptions += 1;
                    sub_ = Sub::gap;
                    return;
                case Sub::gap:
                    sub_ = Sub::read;
                    return;
                case Sub::read:
                    reads_ += 1;
                    if (resolved == BusLevel::dominant) {
                        if (reads_ >= 20) resistant_seen_ = true;
                        flip_ = FlipKind::to_recessive;
                        interruptions += 1;
                        sub_ = Sub::gap;
                    } else {
                        phase_ = Phase::pump;
                        pump_left_ = 16;
                        drive_ = kDriveDominant;
                        interruptions += 1;
                        pump_left_ -= 1;
                        sub_ = Sub::gap;
                    }
                    return;
            }
            return;

        case Phase::pump:
            // passive flags are recessive; each dominant overwrite is one
            // interruption, sixteen of them push 128 past 255
            if (sub_ == Sub::gap) {
                sub_ = Sub::hit;
                return;
            }
            drive_ = kDriveDominant;
            interruptions += 1;
            pump_left_ -= 1;
            sub_ = Sub::gap;
            if (pump_left_ == 0) {
                phase_ = Phase::cool;
                cool_left_ = cfg_.gap_bits;
            }
            return;

        case Phase::cool:
            cool_left_ -= 1;
            if (cool_left_ == 0) {
                phase_ = Phase::drive;
                corrupt_pass_ = false;
                plan_pos_ = 0;
            }
            return;

        case Phase::done:
            return;
    }
}

// -------------------------------------------------------------- driver --

DriveBusAttacker::DriveBusAttacker(const Config& cfg) : cfg_(cfg) {
    assert(!cfg.table.empty());
    assert(cfg.start_bit >= 1);
}

void DriveBusAttacker::advance_plan() {
    if (!in_frame_plan_) {
        if (gap_left_ > 0) {
            gap_left_ -= 1;
            expected_ = BusLevel::recessive;
            tolerate_dominant_ = false;
            return;
        }
        cur_ = encode_frame(cfg_.table[table_pos_]);
        table_pos_ = (table_pos_ + 1) % cfg_.table.size();
        in_frame_plan_ = true;
        cur_pos_ = 0;
        frames_emulated += 1;
    }
    const TaggedBit& tb = cur_.bits[cur_pos_];
    expected_ = tb.level;
    tolerate_dominant_ = tb.field == Field::AckSlot;
    cur_pos_ += 1;
    if (cur_pos_ >= cur_.size()) {
        in_frame_plan_ = false;
        gap_left_ = cfg_.gap_bits;
    }
}

void DriveBusAttacker::observe(BusContext&, BusLevel resolved) {
    // a dominant that survived where the emulation wanted recessive means
    // a flip failed: someone on the bus saw a bit we did not script
    if (started_ && !tolerate_dominant_ && resolved != expected_) corrupted_bits += 1;

    drive_ = kDriveSilent;
    flip_ = FlipKind::none;
    if (now_ + 1 < cfg_.start_bit) return;
    started_ = true;
    advance_plan();
    if (expected_ == BusLevel::dominant) {
        drive_ = kDriveDominant;
    } else {
        drive_ = kDriveRecessive;
        if (!tolerate_dominant_) flip_ = FlipKind::to_recessive;
    }
}

}  // namespace cansim

#include "core/ecu.hpp"

namespace cansim {

namespace {
inline int8_t drive_of(BusLevel l) {
    return l == BusLevel::dominant ? kDriveDominant : kDriveRecessive;
}
}  // namespace

EcuNode::EcuNode(const EcuConfig& cfg) : cfg_(cfg) {
    tec_.value = cfg.initial_tec;
    rec_.value = cfg.initial_rec;
    tec_.resistant = cfg.resistant;
    rec_.resistant = cfg.resistant;
    next_sched_ = cfg.phase_bits;
    if (cfg.transmitter) tx_frame_ = cfg.frame;
}

EcuMode EcuNode::mode() const {
    if (dark_ || tec_.off()) return EcuMode::bus_off;
    if (passive_now()) return EcuMode::error_passive;
    return EcuMode::error_active;
}

void EcuNode::note_mode(BusContext& ctx, EcuMode before) {
    EcuMode now = mode();
    if (now == before) return;
    Annotation a;
    a.kind = AnnKind::mode_change;
    a.node = static_cast<int16_t>(index_);
    a.mode = now;
    ctx.annotate(a);
}

void EcuNode::go_dark(BusContext& ctx) {
    dark_ = true;
    busoff_bit = ctx.bit;
    sig_ = Sig::none;
    tx_active_ = false;
    next_drive_ = kDriveSilent;
}

bool EcuNode::want_tx(uint64_t now) const {
    if (tx_retry_) return true;
    if (!queue_.empty()) return true;
    if (cfg_.transmitter && cfg_.period_bits && now + 1 >= next_sched_) return true;
    return false;
}

void EcuNode::start_tx() {
    Frame f;
    if (tx_retry_) {
        tx_retry_ = false;
        f = tx_frame_;
    } else if (!queue_.empty()) {
        f = queue_.front();
        queue_.pop_front();
    } else {
        f = cfg_.frame;
        next_sched_ += cfg_.period_bits;
    }
    tx_frame_ = f;
    tx_bits_ = encode_frame(f);
    tx_pos_ = 0;
    tx_active_ = true;
    next_drive_ = kDriveDominant;  // SOF
}

void EcuNode::enter_flag() {
    sig_ = Sig::flag;
    flag_cnt_ = 0;
    flag_level_ = passive_now() ? BusLevel::recessive : BusLevel::dominant;
    next_drive_ = silent_sig_ ? kDriveSilent : drive_of(flag_level_);
}

void EcuNode::raise_error(BusContext& ctx, ErrorKind k, ErrorRole role) {
    errors_raised += 1;
    last_error_bit = ctx.bit;
    EcuMode before = mode();
    if (role == ErrorRole::transmitter) {
        charged_tec_ = true;
        tec_.on_error();
    } else {
        charged_rec_ = true;
        rec_.on_error();
    }

    Annotation a;
    a.kind = AnnKind::error;
    a.node = static_cast<int16_t>(index_);
    a.role = role;
    a.error = k;
    ctx.annotate(a);

    if (role == ErrorRole::transmitter) {
        tx_active_ = false;
        tx_retry_ = true;
    }
    dec_.reset();
    in_interm_ = false;
    sig_counter_is_tec_ = role == ErrorRole::transmitter;
    note_mode(ctx, before);
    if (tec_.off()) {
        go_dark(ctx);
        return;
    }

    silent_sig_ = role == ErrorRole::receiver && rec_.value > 255;
    if (silent_sig_) {
        // quiet realignment: wait out the episode without touching the wire
        sig_ = Sig::delim_wait;
        strict_ = false;
        next_drive_ = kDriveSilent;
        return;
    }
    if (run_level_ == BusLevel::dominant &&
        (run_len_ >= 6 || role == ErrorRole::receiver)) {
        // A dominant trigger means a flag is already on the wire (or just
        // starting). Receivers wait it out instead of raising an offset
        // flag of their own, which would collide at the delimiter.
        sig_ = Sig::delim_wait;
        strict_ = false;
        next_drive_ = kDriveRecessive;
        return;
    }
    enter_flag();
}

void EcuNode::sig_error(BusContext& ctx) {
    errors_raised += 1;
    last_error_bit = ctx.bit;
    EcuMode before = mode();
    if (sig_counter_is_tec_) {
        charged_tec_ = true;
        tec_.on_error();
    } else {
        charged_rec_ = true;
        rec_.on_error();
    }
    Annotation a;
    a.kind = AnnKind::error;
    a.node = static_cast<int16_t>(index_);
    a.role = sig_counter_is_tec_ ? ErrorRole::transmitter : ErrorRole::receiver;
    a.error = ErrorKind::BitMonitoring;
    ctx.annotate(a);
    note_mode(ctx, before);
    if (tec_.off()) go_dark(ctx);
}

void EcuNode::handle_signaling(BusContext& ctx, BusLevel resolved) {
    switch (sig_) {
        case Sig::flag:
            if (resolved == flag_level_) {
                flag_cnt_ += 1;
                if (flag_cnt_ >= 6) {
                    strict_ = flag_level_ == BusLevel::dominant;
                    sig_ = Sig::delim_wait;
                    next_drive_ = silent_sig_ ? kDriveSilent : kDriveRecessive;
                } else {
                    next_drive_ = silent_sig_ ? kDriveSilent : drive_of(flag_level_);
                }
            } else {
                sig_error(ctx);
                if (dark_) return;
                enter_flag();
            }
            break;

        case Sig::delim_wait:
            if (resolved == BusLevel::recessive) {
                sig_ = Sig::delim_count;
                delim_cnt_ = 1;
                next_drive_ = silent_sig_ ? kDriveSilent : kDriveRecessive;
            } else if (strict_ && !silent_sig_) {
                sig_error(ctx);
                if (dark_) return;
                enter_flag();
            } else {
                // tolerated: someone else's flag is still completing
                next_drive_ = silent_sig_ ? kDriveSilent : kDriveRecessive;
            }
            break;

        case Sig::delim_count:
            if (resolved == BusLevel::recessive) {
                delim_cnt_ += 1;
                if (delim_cnt_ >= 8) {
                    sig_ = Sig::none;
                    silent_sig_ = false;
                    if (sig_counter_is_tec_ && passive_now()) {
                        // suspend transmission: a passive transmitter waits
                        // 8 bits past intermission (the 11-recessive rule)
                        in_interm_ = false;
                        idle_run_ = 0;
                    } else {
                        in_interm_ = true;
                        interm_cnt_ = 0;
                        idle_run_ = 8;  // the delimiter itself
                    }
                    next_drive_ = kDriveSilent;
                } else {
                    next_drive_ = silent_sig_ ? kDriveSilent : kDriveRecessive;
                }
            } else if (silent_sig_) {
                sig_ = Sig::delim_wait;  // realign from scratch, no charge
                next_drive_ = kDriveSilent;
            } else {
                sig_error(ctx);
                if (dark_) return;
                enter_flag();
            }
            break;

        case Sig::none: break;  // unreachable
    }
}

void EcuNode::handle_normal(BusContext& ctx, BusLevel resolved) {
    idle_run_ = resolved == BusLevel::recessive ? idle_run_ + 1 : 0;

    bool own_final_bit =
        tx_active_ && tx_pos_ + 1 == tx_bits_.eof_end();

    if (tx_active_) {
        if (tx_pos_ == 0) {
            Annotation a;
            a.kind = AnnKind::frame_start;
            a.node = static_cast<int16_t>(index_);
            a.id = tx_frame_.id;
            ctx.annotate(a);
        }
        const TaggedBit& tb = tx_bits_.bits[tx_pos_];
        if (tb.level == BusLevel::recessive && resolved == BusLevel::dominant) {
            if (tb.field == Field::Arbitration) {
                tx_active_ = false;  // legal loss; keep decoding as receiver
                tx_retry_ = true;
                own_final_bit = false;
            } else if (tb.field == Field::AckSlot) {
                // acknowledged, fine
            } else {
                raise_error(ctx, ErrorKind::BitMonitoring, ErrorRole::transmitter);
                return;
            }
        } else if (tb.level == BusLevel::dominant && resolved == BusLevel::recessive) {
            raise_error(ctx, ErrorKind::BitMonitoring, ErrorRole::transmitter);
            return;
        } else if (tb.field == Field::AckSlot && resolved == BusLevel::recessive) {
            raise_error(ctx, ErrorKind::Ack, ErrorRole::transmitter);
            return;
        }
    }

    FrameDecoder::Step st = dec_.feed(resolved);
    if (st.event == FrameDecoder::Event::error) {
        raise_error(ctx, st.error,
                    tx_active_ ? ErrorRole::transmitter : ErrorRole::receiver);
        return;
    }
    bool completed = st.event == FrameDecoder::Event::complete;
    if (completed && !own_final_bit) {
        deliveries += 1;
        if (delivered.size() < 64) delivered.push_back(dec_.frame());
        rec_.on_good_frame();
        Annotation a;
        a.kind = AnnKind::delivery;
        a.node = static_cast<int16_t>(index_);
        a.id = dec_.frame().id;
        ctx.annotate(a);
    }

    if (tx_active_) {
        if (own_final_bit) {
            frames_ok += 1;
            tec_.on_good_frame();
            Annotation a;
            a.kind = AnnKind::frame_ok;
            a.node = static_cast<int16_t>(index_);
            a.id = tx_frame_.id;
            ctx.annotate(a);
            tx_active_ = false;
        } else {
            tx_pos_ += 1;
            next_drive_ = drive_of(tx_bits_.bits[tx_pos_].level);
        }
    } else {
        next_drive_ = kDriveSilent;
    }

    if (completed) {
        if (own_final_bit && passive_now()) {
            // suspend transmission after a passive node's own frame
            in_interm_ = false;
            idle_run_ = 0;
        } else {
            in_interm_ = true;
            interm_cnt_ = 0;
        }
    }

    if (!tx_active_ && cfg_.ack_enabled && dec_.ack_due_next())
        next_drive_ = kDriveDominant;

    if (!tx_active_ && !dec_.in_frame()) {
        if (!completed) {
            if (resolved == BusLevel::recessive) {
                if (in_interm_) interm_cnt_ += 1;
            } else {
                in_interm_ = false;
            }
        }
        bool eligible = idle_run_ >= 11 || (in_interm_ && interm_cnt_ >= 3);
        if (eligible && want_tx(ctx.bit)) start_tx();
    }
}

void EcuNode::on_bit(BusContext& ctx, BusLevel resolved) {
    if (dark_) {
        next_drive_ = kDriveSilent;
        return;
    }

    if (run_len_ == 0 || resolved != run_level_) {
        run_level_ = resolved;
        run_len_ = 1;
    } else {
        run_len_ += 1;
    }

    charged_tec_ = charged_rec_ = false;

    if (sig_ != Sig::none)
        handle_signaling(ctx, resolved);
    else
        handle_normal(ctx, resolved);

    if (!charged_tec_) tec_.on_clean_bit();
    if (!charged_rec_) rec_.on_clean_bit();
}

}  // namespace cansim

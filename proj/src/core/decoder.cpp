#include "core/decoder.hpp"

#include <algorithm>

namespace cansim {

void FrameDecoder::reset() {
    in_frame_ = false;
    field_ = Field::Sof;
    field_progress_ = 0;
    stuffed_ = true;
    crc_done_ = false;
    run_level_ = BusLevel::recessive;
    run_len_ = 0;
    arb_bits_.clear();
    id_prefix_.clear();
    id_complete_ = false;
    extended_ = false;
    rtr_ = false;
    id_ = 0;
    dlc_ = 0;
    data_len_ = 0;
    ctrl_need_ = 0;
    ctrl_bits_.clear();
    crc_ = 0;
    crc_received_ = 0;
    crc_bits_ = 0;
    eof_count_ = 0;
    ack_level_ = BusLevel::recessive;
    frame_ = Frame{};
}

FrameDecoder::Step FrameDecoder::fail(Step st, ErrorKind k) {
    st.event = Event::error;
    st.error = k;
    in_frame_ = false;
    return st;
}

FrameDecoder::Step FrameDecoder::feed(BusLevel bit) {
    Step st;
    if (!in_frame_) {
        if (bit == BusLevel::recessive) return st;
        reset();
        in_frame_ = true;
        field_ = Field::Arbitration;
        run_level_ = BusLevel::dominant;
        run_len_ = 1;
        crc_ = crc15_step(0, 0);  // SOF
        return st;
    }

    if (stuffed_) {
        bool stuff_expected = (run_len_ == 5);
        if (bit == run_level_) {
            ++run_len_;
        } else {
            run_level_ = bit;
            run_len_ = 1;
        }
        if (stuff_expected) {
            if (run_len_ >= 6) return fail(st, ErrorKind::Stuff);
            st.stuff_bit = true;
            if (crc_done_) stuffed_ = false;  // trailing stuff after last CRC bit
            return st;
        }
        if (run_len_ >= 6) return fail(st, ErrorKind::Stuff);
        return content_bit(bit, st);
    }
    return tail_bit(bit, st);
}

FrameDecoder::Step FrameDecoder::content_bit(BusLevel bit, Step st) {
    int v = level_bit(bit);
    if (field_ != Field::Crc) crc_ = crc15_step(crc_, v);

    switch (field_) {
        case Field::Arbitration: {
            arb_bits_.push_back(static_cast<uint8_t>(v));
            size_t n = arb_bits_.size();
            if (n <= 11) id_prefix_.push_back(static_cast<uint8_t>(v));
            if (n >= 14 && n <= 31) id_prefix_.push_back(static_cast<uint8_t>(v));
            if (n == 13) {
                if (bit == BusLevel::dominant) {  // IDE dominant: standard
                    extended_ = false;
                    rtr_ = arb_bits_[11] != 0;
                    id_ = 0;
                    for (int i = 0; i < 11; ++i) id_ = (id_ << 1) | arb_bits_[i];
                    id_complete_ = true;
                    field_ = Field::Control;
                    ctrl_need_ = 5;  // r0 + DLC
                    field_progress_ = 0;
                } else {
                    extended_ = true;
                }
            } else if (n == 32) {
                rtr_ = arb_bits_[31] != 0;
                id_ = 0;
                for (int i = 0; i < 11; ++i) id_ = (id_ << 1) | arb_bits_[i];
                for (int i = 13; i < 31; ++i) id_ = (id_ << 1) | arb_bits_[i];
                id_complete_ = true;
                field_ = Field::Control;
                ctrl_need_ = 6;  // r1 + r0 + DLC
                field_progress_ = 0;
            }
            return st;
        }
        case Field::Control: {
            ctrl_bits_.push_back(static_cast<uint8_t>(v));
            ++field_progress_;
            if (static_cast<int>(ctrl_bits_.size()) == ctrl_need_) {
                dlc_ = 0;
                for (int i = ctrl_need_ - 4; i < ctrl_need_; ++i)
                    dlc_ = static_cast<uint8_t>((dlc_ << 1) | ctrl_bits_[static_cast<size_t>(i)]);
                data_len_ = rtr_ ? 0 : std::min<int>(dlc_, 8);
                field_ = data_len_ > 0 ? Field::Data : Field::Crc;
                field_progress_ = 0;
            }
            return st;
        }
        case Field::Data: {
            int idx = field_progress_;
            frame_.data[static_cast<size_t>(idx / 8)] =
                static_cast<uint8_t>((frame_.data[static_cast<size_t>(idx / 8)] << 1) | v);
            ++field_progress_;
            if (field_progress_ == data_len_ * 8) {
                field_ = Field::Crc;
                field_progress_ = 0;
            }
            return st;
        }
        case Field::Crc: {
            crc_received_ = static_cast<uint16_t>((crc_received_ << 1) | v);
            ++crc_bits_;
            ++field_progress_;
            if (crc_bits_ == 15) {
                crc_done_ = true;
                if (run_len_ != 5) stuffed_ = false;
                field_ = Field::CrcDelim;
                field_progress_ = 0;
            }
            return st;
        }
        default:
            return st;  // unreachable: tail fields are not stuffed
    }
}

FrameDecoder::Step FrameDecoder::tail_bit(BusLevel bit, Step st) {
    switch (field_) {
        case Field::CrcDelim:
            if (bit == BusLevel::dominant) return fail(st, ErrorKind::Form);
            if (crc_received_ != crc_) return fail(st, ErrorKind::Crc);
            field_ = Field::AckSlot;
            return st;
        case Field::AckSlot:
            ack_level_ = bit;
            if (require_ack_ && bit == BusLevel::recessive) return fail(st, ErrorKind::Ack);
            field_ = Field::AckDelim;
            return st;
        case Field::AckDelim:
            if (bit == BusLevel::dominant) return fail(st, ErrorKind::Form);
            field_ = Field::Eof;
            return st;
        case Field::Eof:
            if (bit == BusLevel::dominant) return fail(st, ErrorKind::Form);
            ++eof_count_;
            if (eof_count_ == 7) {
                frame_.id = id_;
                frame_.extended = extended_;
                frame_.rtr = rtr_;
                frame_.dlc = dlc_;
                if (rtr_) frame_.data.fill(0);
                in_frame_ = false;
                st.event = Event::complete;
            }
            return st;
        default:
            return fail(st, ErrorKind::Form);  // unreachable
    }
}

DecodeOutcome decode_stream(const std::vector<BusLevel>& bits, bool require_ack) {
    FrameDecoder dec;
    dec.set_require_ack(require_ack);
    DecodeOutcome out;
    for (size_t i = 0; i < bits.size(); ++i) {
        auto st = dec.feed(bits[i]);
        if (st.event == FrameDecoder::Event::error) {
            out.ok = false;
            out.error = st.error;
            out.position = i;
            return out;
        }
        if (st.event == FrameDecoder::Event::complete) {
            out.ok = true;
            out.frame = dec.frame();
            out.position = i;
            return out;
        }
    }
    out.ok = false;
    out.error = ErrorKind::Form;
    out.position = bits.size();
    return out;
}

}  // namespace cansim

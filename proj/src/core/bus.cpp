#include "core/bus.hpp"

#include "core/decoder.hpp"

namespace cansim {

BusLevel resolve_level(const int8_t* driven, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (driven[i] == kDriveDominant) return BusLevel::dominant;
    return BusLevel::recessive;
}

FlipOutcome apply_flip(BusLevel base, FlipKind kind, double q, Rng& rng) {
    FlipOutcome out;
    out.resolved = base;
    switch (kind) {
        case FlipKind::none:
            break;
        case FlipKind::toggle:
            out.attempted = true;
            if (base == BusLevel::recessive) {
                out.succeeded = true;
                out.resolved = BusLevel::dominant;
            } else {
                out.succeeded = rng.uniform() < q;
                if (out.succeeded) out.resolved = BusLevel::recessive;
            }
            break;
        case FlipKind::to_recessive:
            if (base == BusLevel::dominant) {
                out.attempted = true;
                out.succeeded = rng.uniform() < q;
                if (out.succeeded) out.resolved = BusLevel::recessive;
            }
            break;
    }
    return out;
}

SimBus::SimBus(const BusConfig& cfg)
    : cfg_(cfg), flip_rng_(derive_seed(cfg.seed, 0x666c6970)) {}  // "flip"

void SimBus::step() {
    size_t n = nodes_.size();
    scratch_.resize(n);
    for (size_t i = 0; i < n; ++i) scratch_[i] = nodes_[i]->driven();
    BusLevel base = resolve_level(scratch_.data(), n);
    FlipKind fk = adv_ ? adv_->flip_request() : FlipKind::none;
    FlipOutcome fo = apply_flip(base, fk, cfg_.q, flip_rng_);
    if (sink_)
        sink_->on_bit(bit_, fo.resolved, fo.attempted, fo.succeeded, scratch_.data(), n);
    BusContext ctx{bit_, sink_};
    for (size_t i = 0; i < n; ++i) nodes_[i]->on_bit(ctx, fo.resolved);
    bit_ += 1;
}

uint64_t SimBus::run(uint64_t max_bits, const std::function<bool()>& halt) {
    uint64_t start = bit_;
    while (bit_ - start < max_bits) {
        if (halt && halt()) break;
        step();
    }
    return bit_ - start;
}

std::vector<uint8_t> idle_detector(const std::vector<BusLevel>& levels) {
    std::vector<uint8_t> out(levels.size(), 0);
    FrameDecoder dec;
    int rec_run = 0;
    bool post_frame = false;
    int post_cnt = 0;
    for (size_t i = 0; i < levels.size(); ++i) {
        BusLevel b = levels[i];
        FrameDecoder::Step st = dec.feed(b);
        rec_run = (b == BusLevel::recessive) ? rec_run + 1 : 0;
        if (st.event == FrameDecoder::Event::complete) {
            post_frame = true;
            post_cnt = 0;
        } else if (st.event == FrameDecoder::Event::error) {
            post_frame = false;
        } else if (post_frame) {
            if (b == BusLevel::recessive) {
                post_cnt += 1;
            } else {
                post_frame = false;  // consumed by the decoder as a new SOF
            }
        }
        out[i] = (rec_run >= 11 || (post_frame && post_cnt >= 3)) ? 1 : 0;
    }
    return out;
}

}  // namespace cansim

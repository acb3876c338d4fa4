#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "core/bus.hpp"
#include "core/counters.hpp"
#include "core/decoder.hpp"
#include "core/frame.hpp"

namespace cansim {

struct EcuConfig {
    std::string name = "ecu";
    bool transmitter = false;   // owns a frame template and a schedule
    Frame frame;
    uint64_t period_bits = 0;   // 0: transmit only via queue_frame
    uint64_t phase_bits = 0;    // earliest scheduled emission
    bool resistant = false;     // resistant-flag mode: gated +8, re-driven flag
    bool ack_enabled = true;
    int initial_tec = 0;
    int initial_rec = 0;
};

// A CAN controller: transmit path with arbitration and bit monitoring,
// always-fed receive decoder, fault confinement counters and the error
// signaling overlay. One instance per simulated ECU.
class EcuNode : public Node {
  public:
    explicit EcuNode(const EcuConfig& cfg);

    const char* name() const override { return cfg_.name.c_str(); }
    int8_t driven() const override { return next_drive_; }
    void on_bit(BusContext& ctx, BusLevel resolved) override;

    void set_index(int idx) { index_ = idx; }

    int tec() const { return tec_.value; }
    int rec() const { return rec_.value; }
    EcuMode mode() const;
    bool bus_off() const { return dark_; }
    bool silenced() const { return rec_.value > 255; }
    bool signaling() const { return sig_ != Sig::none; }
    bool transmitting() const { return tx_active_; }

    // one-shot transmission, ahead of any periodic schedule
    void queue_frame(const Frame& f) { queue_.push_back(f); }

    uint64_t frames_ok = 0;      // own transmissions completed
    uint64_t errors_raised = 0;  // +8 events, interruptions included
    uint64_t deliveries = 0;
    std::vector<Frame> delivered;          // capped at 64 entries
    uint64_t last_error_bit = UINT64_MAX;  // bit index of the latest error
    uint64_t busoff_bit = UINT64_MAX;      // bit index where tec crossed 255

  private:
    enum class Sig : uint8_t { none, flag, delim_wait, delim_count };

    bool passive_now() const { return tec_.passive() || rec_.passive(); }
    bool want_tx(uint64_t now) const;
    void start_tx();
    void raise_error(BusContext& ctx, ErrorKind k, ErrorRole role);
    void sig_error(BusContext& ctx);
    void go_dark(BusContext& ctx);
    void enter_flag();
    void handle_normal(BusContext& ctx, BusLevel resolved);
    void handle_signaling(BusContext& ctx, BusLevel resolved);
    void note_mode(BusContext& ctx, EcuMode before);

    EcuConfig cfg_;
    int index_ = -1;

    ErrorCounter tec_;
    ErrorCounter rec_;
    bool charged_tec_ = false;
    bool charged_rec_ = false;

    FrameDecoder dec_;
    int8_t next_drive_ = kDriveSilent;

    // transmit side
    bool tx_active_ = false;
    bool tx_retry_ = false;
    FrameBits tx_bits_;
    Frame tx_frame_;
    size_t tx_pos_ = 0;
    uint64_t next_sched_ = 0;
    std::deque<Frame> queue_;

    // wire run (resolved levels, error frames included)
    BusLevel run_level_ = BusLevel::recessive;
    int run_len_ = 0;

    // idle / intermission bookkeeping
    int idle_run_ = 0;
    bool in_interm_ = false;
    int interm_cnt_ = 0;

    // error signaling overlay
    Sig sig_ = Sig::none;
    bool sig_counter_is_tec_ = false;
    bool strict_ = false;      // delimiter-wait: dominant restarts signaling
    bool silent_sig_ = false;  // silenced receiver: realign without driving
    BusLevel flag_level_ = BusLevel::dominant;
    int flag_cnt_ = 0;
    int delim_cnt_ = 0;

    bool dark_ = false;  // bus-off, latched
};

}  // namespace cansim

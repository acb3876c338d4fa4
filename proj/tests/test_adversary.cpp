#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "core/adversary.hpp"
#include "core/bus.hpp"
#include "core/ecu.hpp"
#include "core/rng.hpp"
#include "core/trace.hpp"

using namespace cansim;

namespace {

Frame victim_frame() {
    Frame f;
    f.id = 0x1CF00400;
    f.extended = true;
    f.dlc = 4;
    f.data = {0xDE, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0};
    return f;
}

// dominant-rich payload: plenty of kickoff targets for the stealthy attack
Frame stealth_victim_frame() {
    Frame f;
    f.id = 0x1CF00400;
    f.extended = true;
    f.dlc = 8;
    f.data = {0, 0, 0, 0, 0, 0, 0, 0};
    return f;
}

Frame payload_frame() {
    Frame f;
    f.id = 0x00000001;
    f.extended = true;
    f.dlc = 1;
    f.data = {0x55, 0, 0, 0, 0, 0, 0, 0};
    return f;
}

EcuConfig victim_cfg(const Frame& f, uint64_t period, bool resistant = false) {
    EcuConfig c;
    c.name = "victim";
    c.transmitter = true;
    c.frame = f;
    c.period_bits = period;
    c.phase_bits = 0;
    c.resistant = resistant;
    return c;
}

EcuConfig receiver_cfg(const char* name, bool resistant = false) {
    EcuConfig c;
    c.name = name;
    c.resistant = resistant;
    return c;
}

// Minimal acknowledging observer: decodes, drives the ack slot, realigns
// quietly after bus errors, never signals. Stand-in for the monitor node
// a real deployment would have; without one a lone transmitter ack-errors
// itself off the bus.
struct AckBot final : Node {
    FrameDecoder dec;
    bool realign = false;
    int rec_run = 0;
    int8_t drive = kDriveSilent;

    const char* name() const override { return "ackbot"; }
    int8_t driven() const override { return drive; }
    void on_bit(BusContext&, BusLevel resolved) override {
        rec_run = resolved == BusLevel::recessive ? rec_run + 1 : 0;
        drive = kDriveSilent;
        if (realign) {
            if (rec_run >= 11) {
                realign = false;
                dec.reset();
            }
            return;
        }
        auto st = dec.feed(resolved);
        if (st.event == FrameDecoder::Event::error) {
            realign = true;
            return;
        }
        if (dec.ack_due_next()) drive = kDriveDominant;
    }
};

}  // namespace

TEST_CASE("attack offset lands on the first recessive non-stuff data bit") {
    Frame f = victim_frame();
    size_t off = traditional_attack_offset(f);
    FrameBits fb = encode_frame(f);
    REQUIRE(off != 0);
    CHECK(fb.bits[off].field == Field::Data);
    CHECK_FALSE(fb.bits[off].stuff);
    CHECK(fb.bits[off].level == BusLevel::recessive);
    for (size_t i = fb.field_start(Field::Data); i < off; ++i) {
        bool earlier_target = fb.bits[i].field == Field::Data && !fb.bits[i].stuff &&
                              fb.bits[i].level == BusLevel::recessive;
        CHECK_FALSE(earlier_target);
    }
}

TEST_CASE("traditional attack, every attempt: +8 per cycle straight to bus-off") {
    BusConfig bc;
    bc.seed = 41;
    SimBus bus(bc);
    CountingSink sink;
    bus.set_sink(&sink);

    EcuNode victim(victim_cfg(victim_frame(), 400));
    victim.set_index(0);
    TraditionalAttacker::Config ac;
    ac.victim = victim_frame();
    ac.pace = 1;
    TraditionalAttacker atk(ac);

    bus.add_node(&victim);
    bus.set_adversary(&atk);

    std::vector<int> tecs;
    int last = 0;
    for (uint64_t i = 0; i < 60000 && !victim.bus_off(); ++i) {
        bus.step();
        if (victim.tec() != last) {
            last = victim.tec();
            tecs.push_back(last);
        }
    }
    REQUIRE(victim.bus_off());
    CHECK(atk.attacks_launched == 32);
    REQUIRE(tecs.size() == 32);
    for (size_t i = 0; i < tecs.size(); ++i) CHECK(tecs[i] == 8 * (int)(i + 1));
    CHECK(victim.frames_ok == 0);
    // error frames stay visible only while the victim is error-active
    // (15 active flags); passive flags never touch the wire
    CHECK(sink.scanner.completed == 15);
}

TEST_CASE("traditional attack, every 5th attempt: net +4 per cycle, slow bus-off") {
    BusConfig bc;
    bc.seed = 42;
    SimBus bus(bc);

    EcuNode victim(victim_cfg(victim_frame(), 200));
    victim.set_index(0);
    TraditionalAttacker::Config ac;
    ac.victim = victim_frame();
    ac.pace = 5;
    TraditionalAttacker atk(ac);
    AckBot acker;

    bus.add_node(&victim);
    bus.add_node(&acker);
    bus.set_adversary(&atk);

    bus.run(400000, [&] { return victim.bus_off(); });
    REQUIRE(victim.bus_off());
    CHECK(atk.attacks_launched == 63);
    CHECK(victim.tec() == 256);
    CHECK(victim.frames_ok == 62 * 4);
}

TEST_CASE("traditional attack, every 20th attempt: decay wins, no bus-off") {
    BusConfig bc;
    bc.seed = 43;
    SimBus bus(bc);

    EcuNode victim(victim_cfg(victim_frame(), 200));
    victim.set_index(0);
    TraditionalAttacker::Config ac;
    ac.victim = victim_frame();
    ac.pace = 20;
    TraditionalAttacker atk(ac);
    AckBot acker;

    bus.add_node(&victim);
    bus.add_node(&acker);
    bus.set_adversary(&atk);

    int max_tec = 0;
    for (uint64_t i = 0; i < 150000; ++i) {
        bus.step();
        max_tec = std::max(max_tec, victim.tec());
    }
    CHECK_FALSE(victim.bus_off());
    CHECK(max_tec == 8);
    CHECK(atk.attacks_launched >= 30);
    CHECK(victim.frames_ok > 500);
}

TEST_CASE("stealthy attack at q=1: bus-off inside one frame, nothing observable") {
    BusConfig bc;
    bc.seed = 7;
    bc.q = 1.0;
    SimBus bus(bc);
    CountingSink sink;
    bus.set_sink(&sink);

    EcuNode victim(victim_cfg(stealth_victim_frame(), 4000));
    victim.set_index(0);
    EcuNode rx(receiver_cfg("rx"));
    rx.set_index(1);
    StealthyAttacker::Config ac;
    ac.victim = stealth_victim_frame();
    StealthyAttacker atk(ac);

    bus.add_node(&victim);
    bus.add_node(&rx);
    bus.set_adversary(&atk);

    bus.run(2500);

    REQUIRE(victim.bus_off());
    CHECK(victim.tec() == 256);
    CHECK(atk.mirror() == 256);
    CHECK(atk.finished_frame());
    CHECK(atk.rescues() == 0);
    CHECK_FALSE(atk.gave_up());
    CHECK_FALSE(atk.desynced());
    // the victim died well inside its own frame
    CHECK(victim.busoff_bit < 11 + 140);

    // the bus looks perfectly healthy to everyone else
    CHECK(rx.errors_raised == 0);
    CHECK(sink.receiver_errors == 0);
    CHECK(sink.scanner.completed == 0);
    REQUIRE(rx.deliveries == 1);
    CHECK(rx.delivered[0].id == stealth_victim_frame().id);
    CHECK(rx.delivered[0].dlc == 8);
}

TEST_CASE("stealthy attack mirror tracks the victim counter bit for bit") {
    for (uint64_t seed : {11u, 12u, 13u}) {
        BusConfig bc;
        bc.seed = seed;
        bc.q = 0.7;
        SimBus bus(bc);

        EcuNode victim(victim_cfg(stealth_victim_frame(), 4000));
        victim.set_index(0);
        StealthyAttacker::Config ac;
        ac.victim = stealth_victim_frame();
        StealthyAttacker atk(ac);

        bus.add_node(&victim);
        bus.set_adversary(&atk);

        for (uint64_t i = 0; i < 3000; ++i) {
            bus.step();
            if (atk.gave_up()) break;
            CAPTURE(seed);
            CAPTURE(i);
            REQUIRE(atk.mirror() == victim.tec());
        }
    }
}

TEST_CASE("stealthy attack against a resistant victim: detected, reported, pinned") {
    BusConfig bc;
    bc.seed = 7;
    bc.q = 1.0;
    SimBus bus(bc);

    EcuNode victim(victim_cfg(stealth_victim_frame(), 4000, /*resistant=*/true));
    victim.set_index(0);
    StealthyAttacker::Config ac;
    ac.victim = stealth_victim_frame();
    StealthyAttacker atk(ac);

    bus.add_node(&victim);
    bus.set_adversary(&atk);

    bus.run(3000);

    CHECK_FALSE(victim.bus_off());
    CHECK(atk.eref_detected());
    CHECK(atk.gave_up());
    CHECK_FALSE(atk.failure_reason().empty());
    // one charged kickoff, one charged delimiter hit after the quiet pump
    // stretch; everything else arrives too fast to count
    CHECK(victim.tec() == 16);
    CHECK(victim.mode() == EcuMode::error_active);
}

TEST_CASE("stealthy attack with flips disabled aborts and leaves no trace") {
    BusConfig bc;
    bc.seed = 9;
    bc.q = 0.0;
    SimBus bus(bc);
    CountingSink sink;
    bus.set_sink(&sink);

    EcuNode victim(victim_cfg(stealth_victim_frame(), 400));
    victim.set_index(0);
    StealthyAttacker::Config ac;
    ac.victim = stealth_victim_frame();
    StealthyAttacker atk(ac);
    AckBot acker;

    bus.add_node(&victim);
    bus.add_node(&acker);
    bus.set_adversary(&atk);

    bus.run(2000);

    CHECK_FALSE(victim.bus_off());
    CHECK(atk.gave_up());
    CHECK(atk.failure_reason().find("budget") != std::string::npos);
    CHECK(victim.tec() == 0);
    CHECK(victim.frames_ok >= 3);
    CHECK(sink.scanner.completed == 0);
    CHECK(sink.errors_total == 0);
}

TEST_CASE("stealthy attack succeeds almost always at q=0.38") {
    int trials = 300;
    int success = 0;
    int reported_failure = 0;
    for (int t = 0; t < trials; ++t) {
        BusConfig bc;
        bc.seed = derive_seed(2024, static_cast<uint64_t>(t));
        bc.q = 0.38;
        SimBus bus(bc);
        CountingSink sink;
        bus.set_sink(&sink);

        EcuNode victim(victim_cfg(stealth_victim_frame(), 4000));
        victim.set_index(0);
        StealthyAttacker::Config ac;
        ac.victim = stealth_victim_frame();
        StealthyAttacker atk(ac);
        AckBot acker;

        bus.add_node(&victim);
        bus.add_node(&acker);
        bus.set_adversary(&atk);
        bus.run(3000);

        bool ok = victim.bus_off() && sink.scanner.completed == 0 &&
                  sink.receiver_errors == 0;
        if (ok) success += 1;
        if (atk.gave_up()) reported_failure += 1;
    }
    // acceptance pins the tight band on 10^4 trials; this is the smoke check
    CHECK(success >= trials * 95 / 100);
    CHECK(reported_failure <= trials - success);
}

TEST_CASE("blind sync injection lands 25 bits after the first flip, any phase") {
    // phases sampled: initial idle, arbitration, data, tail, next frame
    for (uint64_t t0 : {5u, 20u, 60u, 100u, 160u}) {
        BusConfig bc;
        bc.seed = 77;
        bc.q = 1.0;
        SimBus bus(bc);

        EcuNode victim(victim_cfg(victim_frame(), 140));
        victim.set_index(0);
        EcuNode rx(receiver_cfg("rx"));
        rx.set_index(1);
        BlindSyncAttacker::Config ac;
        ac.payload = payload_frame();
        ac.start_bit = t0;
        ac.synced = true;
        BlindSyncAttacker atk(ac);

        bus.add_node(&victim);
        bus.add_node(&rx);
        bus.set_adversary(&atk);

        bus.run(t0 + 600);

        CAPTURE(t0);
        REQUIRE(atk.injection_complete());
        bool payload_seen = false;
        bool victim_seen = false;
        for (const Frame& f : rx.delivered) {
            if (f.id == payload_frame().id && f.dlc == 1) payload_seen = true;
            if (f.id == victim_frame().id) victim_seen = true;
        }
        CHECK(payload_seen);
        // the interrupted frame retries and still goes through afterwards
        CHECK(victim_seen);
        CHECK_FALSE(rx.bus_off());
        CHECK_FALSE(victim.bus_off());
    }
}

TEST_CASE("blind sync on a dead bus") {
    BusConfig bc;
    bc.seed = 78;
    bc.q = 1.0;
    SimBus bus(bc);

    EcuNode rx(receiver_cfg("rx"));
    rx.set_index(0);
    BlindSyncAttacker::Config ac;
    ac.payload = payload_frame();
    ac.start_bit = 30;
    ac.synced = true;
    BlindSyncAttacker atk(ac);

    bus.add_node(&rx);
    bus.set_adversary(&atk);
    bus.run(400);

    REQUIRE(rx.deliveries == 1);
    CHECK(rx.delivered[0].id == payload_frame().id);
    // the phantom start costs a stuff error, then the second flip erases
    // the receiver's flag bit: two charges before everyone converges
    CHECK(rx.errors_raised == 2);
}

TEST_CASE("unsynced injection into a quiet gap works without the sync prefix") {
    BusConfig bc;
    bc.seed = 79;
    SimBus bus(bc);

    EcuNode rx(receiver_cfg("rx"));
    rx.set_index(0);
    BlindSyncAttacker::Config ac;
    ac.payload = payload_frame();
    ac.start_bit = 41;
    ac.synced = false;
    BlindSyncAttacker atk(ac);

    bus.add_node(&rx);
    bus.set_adversary(&atk);
    bus.run(400);

    REQUIRE(rx.deliveries == 1);
    CHECK(rx.delivered[0].id == payload_frame().id);
    CHECK(rx.errors_raised == 0);
}

TEST_CASE("bus driving: emulated traffic flows, the victim never speaks") {
    BusConfig bc;
    bc.seed = 90;
    bc.q = 1.0;
    SimBus bus(bc);
    CountingSink sink;
    bus.set_sink(&sink);

    EcuNode victim(victim_cfg(victim_frame(), 300, /*resistant=*/true));
    victim.set_index(0);
    EcuNode rx(receiver_cfg("rx"));
    rx.set_index(1);

    Frame emul;
    emul.id = 0x18FF0010;
    emul.extended = true;
    emul.dlc = 2;
    emul.data = {0xA5, 0x3C, 0, 0, 0, 0, 0, 0};
    DriveBusAttacker::Config ac;
    ac.table = {emul};
    ac.gap_bits = 20;
    ac.start_bit = 11;
    DriveBusAttacker atk(ac);

    bus.add_node(&victim);
    bus.add_node(&rx);
    bus.set_adversary(&atk);

    bus.run(3000);

    CHECK(atk.corrupted_bits == 0);  // full control at q=1
    CHECK(victim.frames_ok == 0);    // denial holds
    CHECK(rx.errors_raised == 0);    // the receiver sees a clean bus
    CHECK(rx.deliveries >= 15);
    for (const Frame& f : rx.delivered) CHECK(f.id == emul.id);
    CHECK(atk.frames_emulated >= 15);
}

TEST_CASE("bus driving at q<1 leaves fingerprints the attacker can report") {
    BusConfig bc;
    bc.seed = 91;
    bc.q = 0.6;
    SimBus bus(bc);

    EcuNode victim(victim_cfg(victim_frame(), 300, /*resistant=*/true));
    victim.set_index(0);

    Frame emul;
    emul.id = 0x18FF0010;
    emul.extended = true;
    emul.dlc = 2;
    emul.data = {0xA5, 0x3C, 0, 0, 0, 0, 0, 0};
    DriveBusAttacker::Config ac;
    ac.table = {emul};
    DriveBusAttacker atk(ac);

    bus.add_node(&victim);
    bus.set_adversary(&atk);
    bus.run(2000);

    CHECK(atk.corrupted_bits > 0);
}

TEST_CASE("eof corruption with persistent interruption silences standard receivers") {
    Frame f;
    f.id = 0x18FF0010;
    f.extended = true;
    f.dlc = 2;
    f.data = {0xAB, 0xCD, 0, 0, 0, 0, 0, 0};

    BusConfig bc;
    bc.seed = 5;
    bc.q = 1.0;
    SimBus bus(bc);
    CountingSink sink;
    bus.set_sink(&sink);

    EcuNode rx0(receiver_cfg("rx0"));
    rx0.set_index(0);
    EcuNode rx1(receiver_cfg("rx1"));
    rx1.set_index(1);

    CascadeAttacker::Config ac;
    ac.frame = f;
    CascadeAttacker atk(ac);

    bus.add_node(&rx0);
    bus.add_node(&rx1);
    bus.set_adversary(&atk);

    // wire offset of the corrupted EOF bit
    uint64_t tau = ac.start_bit + encode_frame(f).field_start(Field::Eof);

    bus.run(tau + 1);
    CHECK(rx0.errors_raised == 1);  // the form violation, nothing before it
    CHECK(rx1.errors_raised == 1);
    CHECK(rx0.last_error_bit == tau);
    CHECK(rx0.rec() == 8);

    // one interruption per two bits: 16 charges to passive, 16 more to silence
    bus.run(tau + 61 - bus.now() + 1);
    CHECK(rx0.silenced());
    CHECK(rx1.silenced());
    CHECK(rx0.rec() == 256);
    CHECK(rx0.errors_raised == 32);

    bus.run(4000 - bus.now());
    CHECK(atk.replay_complete());
    CHECK(!atk.resistant_seen());
    CHECK(rx0.deliveries == 1);  // the replay lands on silenced receivers
    CHECK(rx1.deliveries == 1);
    REQUIRE(rx0.delivered.size() == 1);
    CHECK(rx0.delivered[0] == f);
    CHECK(rx0.rec() == 255);  // the good frame pays one back
    CHECK(sink.scanner.completed == 0);  // no six-bit run ever shows
}

TEST_CASE("eof corruption against resistant receivers never completes a frame") {
    Frame f;
    f.id = 0x18FF0010;
    f.extended = true;
    f.dlc = 2;
    f.data = {0xAB, 0xCD, 0, 0, 0, 0, 0, 0};

    BusConfig bc;
    bc.seed = 5;
    bc.q = 1.0;
    SimBus bus(bc);
    CountingSink sink;
    bus.set_sink(&sink);

    EcuNode rx0(receiver_cfg("rx0", /*resistant=*/true));
    rx0.set_index(0);
    EcuNode rx1(receiver_cfg("rx1", /*resistant=*/true));
    rx1.set_index(1);

    CascadeAttacker::Config ac;
    ac.frame = f;
    CascadeAttacker atk(ac);

    bus.add_node(&rx0);
    bus.add_node(&rx1);
    bus.set_adversary(&atk);

    bus.run(4000);

    CHECK(rx0.deliveries == 0);
    CHECK(rx1.deliveries == 0);
    CHECK(rx0.rec() == 8);  // one charged episode, interruptions gated
    CHECK(rx1.rec() == 8);
    CHECK(rx0.signaling());  // still inside the same error episode
    CHECK(rx1.signaling());
    CHECK(rx0.errors_raised > 1000);
    CHECK(atk.resistant_seen());
    CHECK(!atk.replay_complete());
    CHECK(sink.scanner.completed == 0);
}

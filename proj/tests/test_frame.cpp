#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "core/decoder.hpp"
#include "core/frame.hpp"
#include "core/rng.hpp"
#include "core/textio.hpp"

using namespace cansim;

namespace {

std::vector<BusLevel> bits_of(const std::string& s) {
    std::vector<BusLevel> out;
    for (char c : s) out.push_back(c == '0' ? BusLevel::dominant : BusLevel::recessive);
    return out;
}

std::string str_of(const std::vector<BusLevel>& v) {
    std::string s;
    for (BusLevel b : v) s += (b == BusLevel::dominant ? '0' : '1');
    return s;
}

// Independent CRC oracle: textbook long division by the full generator
// x^15+x^14+x^10+x^8+x^7+x^4+x^3+1 with 15 zero bits appended.
uint16_t crc_oracle(const std::vector<BusLevel>& msg) {
    static const int gen[16] = {1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1};
    std::vector<int> work;
    for (BusLevel b : msg) work.push_back(level_bit(b));
    work.resize(msg.size() + 15, 0);
    for (size_t i = 0; i < msg.size(); ++i)
        if (work[i])
            for (int j = 0; j < 16; ++j) work[i + j] ^= gen[j];
    uint16_t r = 0;
    for (size_t j = msg.size(); j < work.size(); ++j)
        r = static_cast<uint16_t>((r << 1) | work[j]);
    return r;
}

// Independent stuffer: emit input bits, inserting the opposite level
// after every run of five; inserted bits seed the next run.
std::vector<BusLevel> stuff_oracle(const std::vector<BusLevel>& in) {
    std::vector<BusLevel> out;
    BusLevel lv = BusLevel::dominant;
    int run = 0;
    for (BusLevel b : in) {
        if (!out.empty() && b == lv) {
            run += 1;
        } else {
            lv = b;
            run = 1;
        }
        out.push_back(b);
        if (run == 5) {
            lv = opposite(lv);
            out.push_back(lv);
            run = 1;
        }
    }
    return out;
}

Frame random_frame(Rng& r) {
    Frame f;
    f.extended = r.below(2) == 1;
    f.id = static_cast<uint32_t>(r.below(f.extended ? 0x20000000ull : 0x800ull));
    f.rtr = r.below(8) == 0;
    f.dlc = static_cast<uint8_t>(r.below(9));
    if (!f.rtr)
        for (int i = 0; i < f.dlc; ++i) f.data[i] = static_cast<uint8_t>(r.below(256));
    return f;
}

// Minimal from-scratch encoder used as an end-to-end oracle. Returns the
// full wire image including delimiter, ACK slot, EOF and intermission.
std::vector<BusLevel> encode_oracle_ext(uint32_t id, int dlc_nibble, const uint8_t* data,
                                        int data_bytes) {
    std::vector<BusLevel> body;
    auto push = [&](int bit) { body.push_back(level_from_bit(bit)); };
    push(0);                                            // SOF
    for (int i = 10; i >= 0; --i) push((id >> (18 + i)) & 1);
    push(1);                                            // SRR
    push(1);                                            // IDE
    for (int i = 17; i >= 0; --i) push((id >> i) & 1);
    push(0);                                            // RTR
    push(0);                                            // r1
    push(0);                                            // r0
    for (int i = 3; i >= 0; --i) push((dlc_nibble >> i) & 1);
    for (int b = 0; b < data_bytes; ++b)
        for (int i = 7; i >= 0; --i) push((data[b] >> i) & 1);
    uint16_t crc = crc_oracle(body);
    for (int i = 14; i >= 0; --i) push((crc >> i) & 1);
    std::vector<BusLevel> wire = stuff_oracle(body);
    for (int i = 0; i < 13; ++i) wire.push_back(BusLevel::recessive);
    return wire;
}

}  // namespace

TEST_CASE("crc15 fixed points") {
    CHECK(crc15({}) == 0);
    CHECK(crc15({BusLevel::dominant}) == 0);
    CHECK(crc15({BusLevel::recessive}) == kCrc15Poly);
}

TEST_CASE("crc15 equals long-division oracle") {
    Rng rng(0x3141592653589793ull);
    for (int len = 0; len <= 96; ++len) {
        for (int rep = 0; rep < 24; ++rep) {
            std::vector<BusLevel> msg;
            for (int i = 0; i < len; ++i)
                msg.push_back(level_from_bit(static_cast<int>(rng.below(2))));
            CAPTURE(len);
            REQUIRE(crc15(msg) == crc_oracle(msg));
        }
    }
}

TEST_CASE("stuffing frozen examples") {
    CHECK(str_of(stuff_bits(bits_of("11111"))) == "111110");
    CHECK(str_of(stuff_bits(bits_of("0000011111"))) == "000001111101");
    CHECK(str_of(stuff_bits(bits_of("00000"))) == "000001");
    CHECK(str_of(stuff_bits(bits_of("0101"))) == "0101");

    auto v = unstuff_bits(bits_of("000000"));
    REQUIRE(v.violation.has_value());
    CHECK(*v.violation == 5);

    auto v2 = unstuff_bits(bits_of("0111111"));
    REQUIRE(v2.violation.has_value());
    CHECK(*v2.violation == 6);

    auto ok = unstuff_bits(bits_of("000001111101"));
    CHECK(!ok.violation.has_value());
    CHECK(str_of(ok.bits) == "0000011111");
}

TEST_CASE("stuffing equals brute-force oracle for all inputs up to 12 bits") {
    for (int len = 1; len <= 12; ++len) {
        for (uint32_t v = 0; v < (1u << len); ++v) {
            std::vector<BusLevel> in;
            for (int j = 0; j < len; ++j) in.push_back(level_from_bit((v >> j) & 1));
            auto got = stuff_bits(in);
            auto want = stuff_oracle(in);
            CAPTURE(len);
            CAPTURE(v);
            REQUIRE(str_of(got) == str_of(want));
        }
    }
}

TEST_CASE("exhaustive stuff/unstuff round-trip for all inputs up to 16 bits") {
    for (int len = 1; len <= 16; ++len) {
        for (uint32_t v = 0; v < (1u << len); ++v) {
            std::vector<BusLevel> in;
            for (int j = 0; j < len; ++j) in.push_back(level_from_bit((v >> j) & 1));
            auto stuffed = stuff_bits(in);
            // property: no six-run in the stuffed image
            int run = 0;
            BusLevel lv = BusLevel::dominant;
            for (BusLevel b : stuffed) {
                run = (run > 0 && b == lv) ? run + 1 : 1;
                lv = b;
                REQUIRE(run <= 5);
            }
            auto back = unstuff_bits(stuffed);
            REQUIRE(!back.violation.has_value());
            REQUIRE(str_of(back.bits) == str_of(in));
        }
    }
}

TEST_CASE("extended dlc=8 layout arithmetic") {
    Frame f;
    f.id = 0x1CF00400;
    f.extended = true;
    f.dlc = 8;
    for (int i = 0; i < 8; ++i) f.data[i] = static_cast<uint8_t>(0x11 * (i + 1));
    FrameBits fb = encode_frame(f);

    size_t unstuffed = 0;
    size_t per_field[10] = {0};
    for (const TaggedBit& tb : fb.bits)
        if (!tb.stuff) {
            unstuffed += 1;
            per_field[static_cast<int>(tb.field)] += 1;
        }
    CHECK(unstuffed == 131);
    CHECK(per_field[static_cast<int>(Field::Sof)] == 1);
    CHECK(per_field[static_cast<int>(Field::Arbitration)] == 32);
    CHECK(per_field[static_cast<int>(Field::Control)] == 6);
    CHECK(per_field[static_cast<int>(Field::Data)] == 64);
    CHECK(per_field[static_cast<int>(Field::Crc)] == 15);
    CHECK(per_field[static_cast<int>(Field::Eof)] == 7);
    CHECK(per_field[static_cast<int>(Field::Intermission)] == 3);

    // delimiters, ACK slot, EOF and intermission all ride recessive
    for (size_t i = fb.field_start(Field::CrcDelim); i < fb.size(); ++i)
        CHECK(fb.bits[i].level == BusLevel::recessive);

    CHECK(frame_wire_bits(f) == fb.size() - 3);
    CHECK(fb.eof_end() == fb.size() - 3);
}

TEST_CASE("encode matches the from-scratch oracle encoder") {
    Frame f;
    f.id = 0x18DAF110;
    f.extended = true;
    f.dlc = 8;
    uint8_t payload[8] = {0xDE, 0xAD, 0xBE, 0xEF, 0x01, 0x23, 0x45, 0x67};
    for (int i = 0; i < 8; ++i) f.data[i] = payload[i];
    auto got = encode_frame(f).levels();
    auto want = encode_oracle_ext(f.id, 8, payload, 8);
    REQUIRE(str_of(got) == str_of(want));
}

TEST_CASE("decode(encode(f)) round-trips 10^4 random frames") {
    Rng rng(0xC0FFEEull);
    for (int t = 0; t < 10000; ++t) {
        Frame f = random_frame(rng);
        auto wire = encode_frame(f).levels();
        DecodeOutcome out = decode_stream(wire);
        CAPTURE(t);
        REQUIRE(out.ok);
        REQUIRE(out.frame == f);
    }
}

TEST_CASE("every single-bit corruption before the ACK slot is detected") {
    Frame frames[2];
    frames[0].id = 0x1CF00400;
    frames[0].extended = true;
    frames[0].dlc = 4;
    frames[0].data = {0xDE, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0};
    frames[1].id = 0x355;
    frames[1].extended = false;
    frames[1].dlc = 3;
    frames[1].data = {0x01, 0x80, 0x7E, 0, 0, 0, 0, 0};

    for (const Frame& f : frames) {
        FrameBits fb = encode_frame(f);
        auto wire = fb.levels();
        size_t ack = fb.field_start(Field::AckSlot);
        size_t interm = fb.field_start(Field::Intermission);
        for (size_t pos = 0; pos < interm; ++pos) {
            if (pos == ack) continue;  // dominant ACK is a legal level there
            auto mut = wire;
            mut[pos] = opposite(mut[pos]);
            DecodeOutcome out = decode_stream(mut);
            CAPTURE(pos);
            REQUIRE(!out.ok);
        }
        // a dominant ACK slot is not a corruption
        auto acked = wire;
        acked[ack] = BusLevel::dominant;
        CHECK(decode_stream(acked).ok);
    }
}

TEST_CASE("flips inside the CRC field surface as Crc at the delimiter") {
    Frame f;
    f.id = 0x0F1;
    f.extended = false;
    f.dlc = 2;
    f.data = {0x42, 0x99, 0, 0, 0, 0, 0, 0};
    FrameBits fb = encode_frame(f);
    auto wire = fb.levels();
    size_t delim = fb.field_start(Field::CrcDelim);
    for (size_t pos = 0; pos < fb.size(); ++pos) {
        if (fb.bits[pos].field != Field::Crc || fb.bits[pos].stuff) continue;
        auto mut = wire;
        mut[pos] = opposite(mut[pos]);
        DecodeOutcome out = decode_stream(mut);
        CAPTURE(pos);
        REQUIRE(!out.ok);
        // Crc is raised at the decoder's delimiter; the flip may have
        // added or removed one stuff condition, shifting it by one.
        if (out.error == ErrorKind::Crc) {
            CHECK(out.position >= delim - 1);
            CHECK(out.position <= delim + 1);
        }
        // a flip may instead break stuffing; that is detected earlier
        if (out.error == ErrorKind::Stuff) CHECK(out.position < delim);
    }
}

TEST_CASE("dominant bits in fixed recessive fields raise Form at that bit") {
    Frame f;
    f.id = 0x12345678 & 0x1fffffff;
    f.extended = true;
    f.dlc = 1;
    f.data = {0x5A, 0, 0, 0, 0, 0, 0, 0};
    FrameBits fb = encode_frame(f);
    auto wire = fb.levels();
    for (Field fd : {Field::CrcDelim, Field::AckDelim, Field::Eof}) {
        size_t start = fb.field_start(fd);
        size_t count = fb.field_count(fd);
        for (size_t pos = start; pos < start + count; ++pos) {
            if (fd == Field::Eof && pos == start + count - 1) continue;  // see below
            auto mut = wire;
            mut[pos] = BusLevel::dominant;
            DecodeOutcome out = decode_stream(mut);
            CAPTURE(pos);
            REQUIRE(!out.ok);
            REQUIRE(out.error == ErrorKind::Form);
            REQUIRE(out.position == pos);
        }
    }
    // final EOF bit still raises Form for a pure decoder
    auto mut = wire;
    size_t last_eof = fb.field_start(Field::Eof) + fb.field_count(Field::Eof) - 1;
    mut[last_eof] = BusLevel::dominant;
    DecodeOutcome out = decode_stream(mut);
    REQUIRE(!out.ok);
    CHECK(out.error == ErrorKind::Form);
}

TEST_CASE("decoder accepts dlc above 8 and caps the data field at 8 bytes") {
    uint8_t payload[8] = {1, 2, 3, 4, 5, 6, 7, 8};
    auto wire = encode_oracle_ext(0x00ABCDEF, 12, payload, 8);
    DecodeOutcome out = decode_stream(wire);
    REQUIRE(out.ok);
    CHECK(out.frame.dlc == 12);
    for (int i = 0; i < 8; ++i) CHECK(out.frame.data[i] == payload[i]);
}

TEST_CASE("remote frames carry a dlc but no data field") {
    Frame f;
    f.id = 0x0F1;
    f.extended = false;
    f.rtr = true;
    f.dlc = 4;
    auto wire = encode_frame(f).levels();
    DecodeOutcome out = decode_stream(wire);
    REQUIRE(out.ok);
    CHECK(out.frame.rtr);
    CHECK(out.frame.dlc == 4);
    for (int i = 0; i < 8; ++i) CHECK(out.frame.data[i] == 0);
}

TEST_CASE("require_ack turns a recessive slot into an Ack error") {
    Frame f;
    f.id = 0x100;
    f.extended = false;
    f.dlc = 0;
    FrameBits fb = encode_frame(f);
    auto wire = fb.levels();
    DecodeOutcome out = decode_stream(wire, true);
    REQUIRE(!out.ok);
    CHECK(out.error == ErrorKind::Ack);
    CHECK(out.position == fb.field_start(Field::AckSlot));

    auto acked = wire;
    acked[fb.field_start(Field::AckSlot)] = BusLevel::dominant;
    CHECK(decode_stream(acked, true).ok);
}

TEST_CASE("encode_frame validates its input") {
    Frame f;
    f.extended = false;
    f.id = 0x800;
    CHECK_THROWS(encode_frame(f));
    f.id = 0x7ff;
    f.dlc = 9;
    CHECK_THROWS(encode_frame(f));
    f.dlc = 8;
    CHECK_NOTHROW(encode_frame(f));
    f.extended = true;
    f.id = 0x20000000;
    CHECK_THROWS(encode_frame(f));
}

TEST_CASE("frame text parsing and formatting") {
    Frame f = parse_frame_text("1CF00400#DEADBEEF");
    CHECK(f.extended);
    CHECK(f.id == 0x1CF00400);
    CHECK(f.dlc == 4);
    CHECK(f.data[0] == 0xDE);
    CHECK(f.data[3] == 0xEF);
    CHECK(format_frame_text(f) == "1CF00400#DEADBEEF");

    Frame g = parse_frame_text("0F1#");
    CHECK(!g.extended);
    CHECK(g.id == 0xF1);
    CHECK(g.dlc == 0);

    Frame r = parse_frame_text("355#4R");
    CHECK(r.rtr);
    CHECK(r.dlc == 4);
    CHECK(format_frame_text(r) == "355#4R");

    CHECK_THROWS(parse_frame_text("GARBAGE#00"));
    CHECK_THROWS(parse_frame_text("123#0"));          // odd digit count
    CHECK_THROWS(parse_frame_text("123#001122334455667788"));  // 9 bytes
    CHECK_THROWS(parse_frame_text("#00"));
    CHECK_THROWS(parse_frame_text("20000000#00"));    // 30-bit id
}

TEST_CASE("id list loading") {
    std::string path = "/tmp/cansim_idlist_test.txt";
    FILE* fp = fopen(path.c_str(), "w");
    REQUIRE(fp);
    fputs("# known senders\n1CF00400\n  0F1  # brake node\n\n18DAF110\n", fp);
    fclose(fp);
    auto ids = load_id_list(path);
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == 0x1CF00400);
    CHECK(ids[1] == 0xF1);
    CHECK(ids[2] == 0x18DAF110);
    remove(path.c_str());
}

#include "core/textio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cansim {

const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::BitMonitoring: return "bit_monitoring";
        case ErrorKind::Stuff: return "stuff";
        case ErrorKind::Form: return "form";
        case ErrorKind::Crc: return "crc";
        case ErrorKind::Ack: return "ack";
    }
    return "?";
}

const char* field_name(Field f) {
    switch (f) {
        case Field::Sof: return "sof";
        case Field::Arbitration: return "arbitration";
        case Field::Control: return "control";
        case Field::Data: return "data";
        case Field::Crc: return "crc";
        case Field::CrcDelim: return "crc_delim";
        case Field::AckSlot: return "ack_slot";
        case Field::AckDelim: return "ack_delim";
        case Field::Eof: return "eof";
        case Field::Intermission: return "intermission";
    }
    return "?";
}

const char* ecu_mode_name(EcuMode m) {
    switch (m) {
        case EcuMode::error_active: return "error_active";
        case EcuMode::error_passive: return "error_passive";
        case EcuMode::bus_off: return "bus_off";
    }
    return "?";
}

namespace {

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

Frame parse_frame_text(const std::string& text) {
    auto hash = text.find('#');
    if (hash == std::string::npos || hash == 0)
        throw std::invalid_argument("frame text needs ID#DATA: " + text);

    Frame f;
    uint32_t id = 0;
    for (size_t i = 0; i < hash; ++i) {
        int v = hex_val(text[i]);
        if (v < 0) throw std::invalid_argument("bad id digit in: " + text);
        id = (id << 4) | static_cast<uint32_t>(v);
    }
    f.id = id;
    f.extended = hash > 3 || id > 0x7ff;
    if (f.extended && id > 0x1fffffff)
        throw std::invalid_argument("id too wide: " + text);

    std::string payload = text.substr(hash + 1);
    if (!payload.empty() && (payload.back() == 'R' || payload.back() == 'r')) {
        f.rtr = true;
        payload.pop_back();
        if (payload.size() > 1) throw std::invalid_argument("remote frame carries no data: " + text);
        f.dlc = payload.empty() ? 0 : static_cast<uint8_t>(hex_val(payload[0]));
        if (f.dlc > 8) throw std::invalid_argument("dlc out of range: " + text);
        return f;
    }
    if (payload.size() % 2 != 0 || payload.size() > 16)
        throw std::invalid_argument("payload must be 0..8 whole bytes: " + text);
    f.dlc = static_cast<uint8_t>(payload.size() / 2);
    for (size_t i = 0; i < payload.size(); i += 2) {
        int hi = hex_val(payload[i]), lo = hex_val(payload[i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("bad payload digit in: " + text);
        f.data[i / 2] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return f;
}

std::string format_id(uint32_t id, bool extended) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), extended ? "%08X" : "%03X", id);
    return buf;
}

std::string format_frame_text(const Frame& f) {
    std::string out = format_id(f.id, f.extended);
    out += '#';
    if (f.rtr) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%X", f.dlc);
        out += buf;
        out += 'R';
        return out;
    }
    for (int i = 0; i < f.dlc; ++i) {
        char buf[4];
        std::snprintf(buf, sizeof(buf), "%02X", f.data[i]);
        out += buf;
    }
    return out;
}

std::vector<uint32_t> load_id_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open id list: " + path);
    std::vector<uint32_t> ids;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        size_t b = line.find_last_not_of(" \t\r");
        std::string tok = line.substr(a, b - a + 1);
        uint32_t id = 0;
        for (char c : tok) {
            int v = hex_val(c);
            if (v < 0) throw std::runtime_error("bad id '" + tok + "' in " + path);
            id = (id << 4) | static_cast<uint32_t>(v);
        }
        ids.push_back(id);
    }
    return ids;
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

uint64_t parse_u64(const std::string& s) {
    size_t pos = 0;
    uint64_t v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw std::invalid_argument("trailing junk in number: " + s);
    return v;
}

double parse_f64(const std::string& s) {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk in number: " + s);
    return v;
}

}  // namespace cansim

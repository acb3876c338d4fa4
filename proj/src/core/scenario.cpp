#include "core/scenario.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "core/adversary.hpp"
#include "core/bus.hpp"
#include "core/ecu.hpp"
#include "core/trace.hpp"

namespace fs = std::filesystem;

namespace cansim {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// comment starts at the first # outside double quotes
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        else if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

bool parse_bool(const std::string& v, bool* out) {
    if (v == "true") { *out = true; return true; }
    if (v == "false") { *out = false; return true; }
    return false;
}

bool parse_u64(const std::string& v, uint64_t* out) {
    if (v.empty() || v[0] == '-') return false;
    char* end = nullptr;
    errno = 0;
    unsigned long long x = std::strtoull(v.c_str(), &end, 0);
    if (errno != 0 || end != v.c_str() + v.size()) return false;
    *out = x;
    return true;
}

bool parse_double(const std::string& v, double* out) {
    if (v.empty()) return false;
    char* end = nullptr;
    errno = 0;
    double x = std::strtod(v.c_str(), &end);
    if (errno != 0 || end != v.c_str() + v.size()) return false;
    *out = x;
    return true;
}

bool parse_qstring(const std::string& v, std::string* out) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"') return false;
    *out = v.substr(1, v.size() - 2);
    return out->find('"') == std::string::npos;
}

bool parse_byte_array(const std::string& v, std::vector<uint8_t>* out) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') return false;
    out->clear();
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) return false;
        uint64_t x;
        if (!parse_u64(item, &x) || x > 255) return false;
        out->push_back(static_cast<uint8_t>(x));
    }
    if (trim(body).empty()) out->clear();
    return out->size() <= 8;
}

struct ParseState {
    ScenarioConfig cfg;
    std::string section;
    bool seed_seen = false;
    bool node_dlc_set = false;
    bool node_data_set = false;
    bool payload_dlc_set = false;
    bool payload_data_set = false;
};

bool frame_key(Frame* f, bool* dlc_set, bool* data_set, const std::string& key,
               const std::string& val, std::string* err) {
    if (key == "id") {
        uint64_t x;
        if (!parse_u64(val, &x) || x > 0x1FFFFFFF) { *err = "bad id"; return false; }
        f->id = static_cast<uint32_t>(x);
        return true;
    }
    if (key == "extended") {
        if (!parse_bool(val, &f->extended)) { *err = "bad bool"; return false; }
        return true;
    }
    if (key == "dlc") {
        uint64_t x;
        if (!parse_u64(val, &x) || x > 8) { *err = "dlc must be 0..8"; return false; }
        f->dlc = static_cast<uint8_t>(x);
        *dlc_set = true;
        return true;
    }
    if (key == "data") {
        std::vector<uint8_t> bytes;
        if (!parse_byte_array(val, &bytes)) { *err = "bad data array"; return false; }
        f->data.fill(0);
        for (size_t i = 0; i < bytes.size(); ++i) f->data[i] = bytes[i];
        if (!*dlc_set) f->dlc = static_cast<uint8_t>(bytes.size());
        *data_set = true;
        return true;
    }
    *err = "not a frame key";
    return false;
}

bool apply_key(ParseState& st, const std::string& key, const std::string& val,
               std::string* err) {
    ScenarioConfig& cfg = st.cfg;
    std::string ferr;
    if (st.section == "bus") {
        if (key == "bit_rate") return parse_double(val, &cfg.bit_rate) || ((*err = "bad float"), false);
        if (key == "eref") return parse_bool(val, &cfg.eref) || ((*err = "bad bool"), false);
        if (key == "horizon_bits") return parse_u64(val, &cfg.horizon_bits) || ((*err = "bad integer"), false);
        if (key == "seed") {
            st.seed_seen = parse_u64(val, &cfg.seed);
            return st.seed_seen || ((*err = "bad integer"), false);
        }
        if (key == "q") return parse_double(val, &cfg.q) || ((*err = "bad float"), false);
    } else if (st.section == "nodes") {
        NodeSpec& ns = cfg.nodes.back();
        if (key == "name") return parse_qstring(val, &ns.name) || ((*err = "bad string"), false);
        if (key == "transmitter") return parse_bool(val, &ns.transmitter) || ((*err = "bad bool"), false);
        if (key == "period_bits") return parse_u64(val, &ns.period_bits) || ((*err = "bad integer"), false);
        if (key == "phase_bits") return parse_u64(val, &ns.phase_bits) || ((*err = "bad integer"), false);
        if (key == "resistant") {
            bool b;
            if (!parse_bool(val, &b)) { *err = "bad bool"; return false; }
            ns.resistant = b ? 1 : 0;
            return true;
        }
        if (key == "ack") return parse_bool(val, &ns.ack_enabled) || ((*err = "bad bool"), false);
        if (frame_key(&ns.frame, &st.node_dlc_set, &st.node_data_set, key, val, &ferr))
            return true;
        if (ferr != "not a frame key") { *err = ferr; return false; }
    } else if (st.section == "attacker") {
        AttackerSpec& as = cfg.attacker;
        if (key == "strategy") return parse_qstring(val, &as.strategy) || ((*err = "bad string"), false);
        if (key == "victim") return parse_qstring(val, &as.victim) || ((*err = "bad string"), false);
        if (key == "pace") {
            uint64_t x;
            if (!parse_u64(val, &x) || x == 0 || x > UINT32_MAX) { *err = "bad pace"; return false; }
            as.pace = static_cast<uint32_t>(x);
            return true;
        }
        if (key == "start_bit") return parse_u64(val, &as.start_bit) || ((*err = "bad integer"), false);
        if (key == "gap_bits") return parse_u64(val, &as.gap_bits) || ((*err = "bad integer"), false);
        if (key == "synced") return parse_bool(val, &as.synced) || ((*err = "bad bool"), false);
        if (frame_key(&as.payload, &st.payload_dlc_set, &st.payload_data_set, key, val, &ferr)) {
            as.has_payload = true;
            return true;
        }
        if (ferr != "not a frame key") { *err = ferr; return false; }
    } else if (st.section == "ids") {
        IdsSpec& is = cfg.ids;
        if (key == "enabled") return parse_bool(val, &is.enabled) || ((*err = "bad bool"), false);
        if (key == "whitelist") return parse_qstring(val, &is.whitelist) || ((*err = "bad string"), false);
        if (key == "ack") return parse_bool(val, &is.ack) || ((*err = "bad bool"), false);
        if (key == "probes") return parse_bool(val, &is.probes) || ((*err = "bad bool"), false);
        if (key == "probe_min_bits") return parse_u64(val, &is.probe_min_bits) || ((*err = "bad integer"), false);
        if (key == "probe_max_bits") return parse_u64(val, &is.probe_max_bits) || ((*err = "bad integer"), false);
        if (key == "window_bits") return parse_u64(val, &is.window_bits) || ((*err = "bad integer"), false);
        if (key == "aggregate_sigmas") return parse_double(val, &is.aggregate_sigmas) || ((*err = "bad float"), false);
        if (key == "baseline") return parse_qstring(val, &is.baseline) || ((*err = "bad string"), false);
    } else if (st.section == "outputs") {
        OutputSpec& os = cfg.outputs;
        if (key == "trace") return parse_qstring(val, &os.trace) || ((*err = "bad string"), false);
        if (key == "alerts") return parse_qstring(val, &os.alerts) || ((*err = "bad string"), false);
        if (key == "report") return parse_qstring(val, &os.report) || ((*err = "bad string"), false);
        if (key == "trace_limit_bits") return parse_u64(val, &os.trace_limit_bits) || ((*err = "bad integer"), false);
    } else {
        *err = "key outside any section";
        return false;
    }
    *err = "unknown key '" + key + "' in [" + st.section + "]";
    return false;
}

bool id_in_range(const Frame& f) {
    return f.extended ? f.id <= 0x1FFFFFFF : f.id <= 0x7FF;
}

bool validate(const ScenarioConfig& cfg, bool seed_seen, std::string* err) {
    auto fail = [&](const char* m) {
        *err = m;
        return false;
    };
    if (!seed_seen) return fail("bus.seed is mandatory");
    if (cfg.horizon_bits == 0) return fail("bus.horizon_bits must be positive");
    if (!(cfg.q >= 0.0 && cfg.q <= 1.0)) return fail("bus.q must be in [0,1]");
    if (!(cfg.bit_rate > 0.0)) return fail("bus.bit_rate must be positive");

    std::set<std::string> names;
    for (const NodeSpec& ns : cfg.nodes) {
        if (ns.name.empty()) return fail("every node needs a name");
        if (!names.insert(ns.name).second) return fail("duplicate node name");
        if (ns.transmitter && !id_in_range(ns.frame)) return fail("node id out of range");
    }

    const AttackerSpec& as = cfg.attacker;
    const std::set<std::string> strategies = {"none",       "traditional", "stealthy",
                                              "blind-sync", "drive-bus",   "cascade"};
    if (!strategies.count(as.strategy)) return fail("unknown attacker.strategy");
    if (as.strategy == "traditional" || as.strategy == "stealthy") {
        bool found = false;
        for (const NodeSpec& ns : cfg.nodes)
            if (ns.name == as.victim && ns.transmitter) found = true;
        if (!found) return fail("attacker.victim must name a transmitter node");
    }
    if (as.strategy == "blind-sync" || as.strategy == "cascade") {
        if (!as.has_payload) return fail("attacker payload frame required (id/dlc/data)");
        if (!id_in_range(as.payload)) return fail("attacker payload id out of range");
    }
    if (as.strategy == "drive-bus" && !as.has_payload) {
        bool any_tx = false;
        for (const NodeSpec& ns : cfg.nodes) any_tx = any_tx || ns.transmitter;
        if (!any_tx) return fail("drive-bus needs a payload frame or transmitter nodes");
    }
    if (as.strategy == "drive-bus" && as.has_payload && !id_in_range(as.payload))
        return fail("attacker payload id out of range");
    if (as.strategy != "none" && as.start_bit < 1) return fail("attacker.start_bit must be >= 1");

    const IdsSpec& is = cfg.ids;
    if (is.enabled) {
        if (is.probe_min_bits == 0 || is.probe_min_bits > is.probe_max_bits)
            return fail("ids probe interval must satisfy 0 < min <= max");
        if (!is.baseline.empty() && is.window_bits == 0)
            return fail("ids.baseline requires ids.window_bits");
    }
    return true;
}

std::string resolve_path(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path pp(p);
    if (pp.is_absolute() || base.empty()) return p;
    return (fs::path(base) / pp).string();
}

const char* bstr(bool b) { return b ? "true" : "false"; }

void kv(std::string& out, const std::string& key, const std::string& val) {
    out += key;
    out += ',';
    for (char c : val) out += c == ',' ? ';' : c;
    out += '\n';
}

void kv_u64(std::string& out, const std::string& key, uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%" PRIu64, v);
    kv(out, key, buf);
}

}  // namespace

std::optional<ScenarioConfig> parse_scenario(const std::string& text, std::string* err) {
    ParseState st;
    std::stringstream ss(text);
    std::string raw;
    int lineno = 0;
    auto fail = [&](const std::string& m) {
        if (err) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "line %d: ", lineno);
            *err = buf + m;
        }
        return std::optional<ScenarioConfig>{};
    };

    while (std::getline(ss, raw)) {
        lineno += 1;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line == "[[nodes]]") {
            st.section = "nodes";
            st.cfg.nodes.emplace_back();
            st.node_dlc_set = st.node_data_set = false;
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            std::string name = trim(line.substr(1, line.size() - 2));
            if (name != "bus" && name != "attacker" && name != "ids" && name != "outputs")
                return fail("unknown section [" + name + "]");
            st.section = name;
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) return fail("expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) return fail("expected key = value");
        std::string kerr;
        if (!apply_key(st, key, val, &kerr)) return fail(kerr);
    }

    std::string verr;
    if (!validate(st.cfg, st.seed_seen, &verr)) {
        if (err) *err = verr;
        return std::nullopt;
    }
    return st.cfg;
}

std::optional<ScenarioConfig> load_scenario(const std::string& path, std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open " + path;
        return std::nullopt;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    auto cfg = parse_scenario(buf.str(), err);
    if (cfg) cfg->base_dir = fs::path(path).parent_path().string();
    return cfg;
}

// ---------------------------------------------------------------- runner --

std::optional<RunResult> run_scenario(const ScenarioConfig& cfg, const std::string& out_dir,
                                      std::string* err) {
    auto fail = [&](const std::string& m) {
        if (err) *err = m;
        return std::optional<RunResult>{};
    };

    // all inputs are resolved before any artifact is touched, so a broken
    // config never leaves partial output behind
    IdsConfig ic;
    if (cfg.ids.enabled) {
        if (cfg.ids.whitelist == "builtin:demo17") {
            ic.whitelist = demo_whitelist_17();
        } else {
            std::string werr;
            auto wl = Whitelist::load(resolve_path(cfg.base_dir, cfg.ids.whitelist), &werr);
            if (!wl) return fail("whitelist: " + werr);
            ic.whitelist = *wl;
        }
        ic.probe_pool = demo_probe_pool();
        ic.probes_enabled = cfg.ids.probes;
        ic.probe_min_bits = cfg.ids.probe_min_bits;
        ic.probe_max_bits = cfg.ids.probe_max_bits;
        ic.window_bits = cfg.ids.window_bits;
        ic.aggregate_sigmas = cfg.ids.aggregate_sigmas;
        ic.ack_enabled = cfg.ids.ack;
        ic.seed = cfg.seed;
        if (!cfg.ids.baseline.empty()) {
            std::string berr;
            auto b = Baseline::load(resolve_path(cfg.base_dir, cfg.ids.baseline), &berr);
            if (!b) return fail("baseline: " + berr);
            if (ic.window_bits == 0) ic.window_bits = b->window_bits;
            ic.baseline = std::move(b);
        }
    }

    BusConfig bc;
    bc.seed = cfg.seed;
    bc.q = cfg.q;
    bc.bit_rate = cfg.bit_rate;
    SimBus bus(bc);

    std::vector<std::unique_ptr<EcuNode>> ecus;
    EcuNode* victim_node = nullptr;
    Frame victim_frame;
    int idx = 0;
    for (const NodeSpec& ns : cfg.nodes) {
        EcuConfig ec;
        ec.name = ns.name;
        ec.transmitter = ns.transmitter;
        ec.frame = ns.frame;
        ec.period_bits = ns.period_bits;
        ec.phase_bits = ns.phase_bits;
        ec.resistant = ns.resistant < 0 ? cfg.eref : ns.resistant != 0;
        ec.ack_enabled = ns.ack_enabled;
        ecus.push_back(std::make_unique<EcuNode>(ec));
        ecus.back()->set_index(idx++);
        bus.add_node(ecus.back().get());
        if (ns.name == cfg.attacker.victim) {
            victim_node = ecus.back().get();
            victim_frame = ns.frame;
        }
    }

    std::unique_ptr<IdsNode> ids;
    if (cfg.ids.enabled) {
        ids = std::make_unique<IdsNode>(ic);
        bus.add_node(ids.get());
    }

    std::unique_ptr<AdversaryNode> atk;
    TraditionalAttacker* trad = nullptr;
    StealthyAttacker* ste = nullptr;
    BlindSyncAttacker* blind = nullptr;
    DriveBusAttacker* drv = nullptr;
    CascadeAttacker* casc = nullptr;
    const std::string& strat = cfg.attacker.strategy;
    if (strat == "traditional") {
        TraditionalAttacker::Config c;
        c.victim = victim_frame;
        c.pace = cfg.attacker.pace;
        atk.reset(trad = new TraditionalAttacker(c));
    } else if (strat == "stealthy") {
        StealthyAttacker::Config c;
        c.victim = victim_frame;
        atk.reset(ste = new StealthyAttacker(c));
    } else if (strat == "blind-sync") {
        BlindSyncAttacker::Config c;
        c.payload = cfg.attacker.payload;
        c.start_bit = cfg.attacker.start_bit;
        c.synced = cfg.attacker.synced;
        atk.reset(blind = new BlindSyncAttacker(c));
    } else if (strat == "drive-bus") {
        DriveBusAttacker::Config c;
        if (cfg.attacker.has_payload) {
            c.table.push_back(cfg.attacker.payload);
        } else {
            for (const NodeSpec& ns : cfg.nodes)
                if (ns.transmitter) c.table.push_back(ns.frame);
        }
        c.gap_bits = cfg.attacker.gap_bits;
        c.start_bit = cfg.attacker.start_bit;
        atk.reset(drv = new DriveBusAttacker(c));
    } else if (strat == "cascade") {
        CascadeAttacker::Config c;
        c.frame = cfg.attacker.payload;
        c.start_bit = cfg.attacker.start_bit;
        c.gap_bits = cfg.attacker.gap_bits;
        atk.reset(casc = new CascadeAttacker(c));
    }
    if (atk) bus.set_adversary(atk.get());

    CountingSink cnt;
    RecordingSink recorder;
    TeeSink tee(&cnt, &recorder);
    bool want_trace = !cfg.outputs.trace.empty();
    uint64_t cap = cfg.outputs.trace_limit_bits == 0
                       ? cfg.horizon_bits
                       : std::min(cfg.horizon_bits, cfg.outputs.trace_limit_bits);
    if (want_trace) {
        bus.set_sink(&tee);
        bus.run(cap);
        if (cap < cfg.horizon_bits) {
            bus.set_sink(&cnt);
            bus.run(cfg.horizon_bits - cap);
        }
    } else {
        bus.set_sink(&cnt);
        bus.run(cfg.horizon_bits);
    }
    if (ids) ids->finalize(bus.now());

    RunResult r;
    r.bits_elapsed = bus.now();
    r.completed_error_frames = cnt.scanner.completed;
    r.receiver_errors = cnt.receiver_errors;
    if (ids) {
        r.unknown_ids = ids->unknown_ids_seen;
        r.ids_alerts = ids->alerts.size();
    }
    for (size_t i = 0; i < ecus.size(); ++i) {
        const EcuNode& e = *ecus[i];
        NodeSummary s;
        s.name = cfg.nodes[i].name;
        s.transmitter = cfg.nodes[i].transmitter;
        s.tec = e.tec();
        s.rec = e.rec();
        s.bus_off = e.bus_off();
        s.silenced = e.silenced();
        s.signaling = e.signaling();
        s.frames_ok = e.frames_ok;
        s.deliveries = e.deliveries;
        s.errors_raised = e.errors_raised;
        s.busoff_bit = e.busoff_bit;
        r.nodes.push_back(s);
    }
    if (victim_node) {
        r.victim_bus_off = victim_node->bus_off();
        r.victim_busoff_bit = victim_node->busoff_bit;
    } else {
        for (const auto& e : ecus) {
            if (e->bus_off()) {
                r.victim_bus_off = true;
                r.victim_busoff_bit = std::min(r.victim_busoff_bit, e->busoff_bit);
            }
        }
    }

    auto extra_u64 = [&](const char* k, uint64_t v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%" PRIu64, v);
        r.extras.emplace_back(k, buf);
    };
    auto extra_bool = [&](const char* k, bool v) { r.extras.emplace_back(k, bstr(v)); };
    if (trad) {
        r.attacker_failed = !r.victim_bus_off;
        extra_u64("attacks_launched", trad->attacks_launched);
        extra_u64("victim_starts_seen", trad->victim_starts_seen);
    } else if (ste) {
        r.attacker_failed = ste->gave_up() || !r.victim_bus_off;
        r.attacker_note = ste->failure_reason();
        extra_bool("gave_up", ste->gave_up());
        extra_bool("eref_detected", ste->eref_detected());
        extra_bool("finished_frame", ste->finished_frame());
        extra_u64("rescues", ste->rescues());
    } else if (blind) {
        r.attacker_failed = !blind->injection_complete();
        extra_bool("injection_complete", blind->injection_complete());
        extra_bool("synced", cfg.attacker.synced);
    } else if (drv) {
        r.attacker_failed = drv->corrupted_bits > 0;
        if (drv->corrupted_bits > 0) r.attacker_note = "imperfect flips left fingerprints";
        extra_u64("frames_emulated", drv->frames_emulated);
        extra_u64("corrupted_bits", drv->corrupted_bits);
    } else if (casc) {
        r.attacker_failed = !casc->replay_complete();
        if (casc->resistant_seen()) r.attacker_note = "receivers kept signaling";
        extra_bool("replay_complete", casc->replay_complete());
        extra_bool("resistant_seen", casc->resistant_seen());
        extra_u64("interruptions", casc->interruptions);
    }

    std::error_code dir_err;
    fs::create_directories(out_dir, dir_err);
    auto opath = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    if (want_trace) {
        std::vector<std::string> names;
        for (const Node* n : bus.nodes()) names.emplace_back(n->name());
        if (!write_trace_jsonl(opath(cfg.outputs.trace), recorder.events, names))
            return fail("cannot write " + cfg.outputs.trace);
    }
    if (!cfg.outputs.alerts.empty()) {
        static const std::vector<Alert> kNone;
        if (!write_alerts_jsonl(opath(cfg.outputs.alerts), ids ? ids->alerts : kNone))
            return fail("cannot write " + cfg.outputs.alerts);
    }
    if (!cfg.outputs.report.empty()) {
        std::ofstream out(opath(cfg.outputs.report), std::ios::binary);
        out << format_report_csv(cfg, r);
        if (!out) return fail("cannot write " + cfg.outputs.report);
    }
    return r;
}

std::string format_report_csv(const ScenarioConfig& cfg, const RunResult& r) {
    std::string out;
    out.reserve(1024);
    char buf[64];
    kv(out, "key", "value");
    kv(out, "strategy", cfg.attacker.strategy);
    kv_u64(out, "seed", cfg.seed);
    std::snprintf(buf, sizeof buf, "%g", cfg.q);
    kv(out, "q", buf);
    kv(out, "eref", bstr(cfg.eref));
    kv_u64(out, "horizon_bits", cfg.horizon_bits);
    kv_u64(out, "bits_elapsed", r.bits_elapsed);
    kv(out, "victim", cfg.attacker.victim.empty() ? "-" : cfg.attacker.victim);
    kv(out, "victim_bus_off", bstr(r.victim_bus_off));
    if (r.victim_busoff_bit == UINT64_MAX)
        kv(out, "victim_busoff_bit", "none");
    else
        kv_u64(out, "victim_busoff_bit", r.victim_busoff_bit);
    kv_u64(out, "completed_error_frames", r.completed_error_frames);
    kv_u64(out, "receiver_errors", r.receiver_errors);
    kv_u64(out, "unknown_ids", r.unknown_ids);
    kv_u64(out, "ids_alerts", r.ids_alerts);
    kv(out, "attacker_failed", bstr(r.attacker_failed));
    kv(out, "attacker_note", r.attacker_note.empty() ? "-" : r.attacker_note);
    for (const auto& [k, v] : r.extras) kv(out, k, v);
    for (const NodeSummary& n : r.nodes) {
        std::string p = "node." + n.name + ".";
        kv_u64(out, p + "tec", static_cast<uint64_t>(n.tec));
        kv_u64(out, p + "rec", static_cast<uint64_t>(n.rec));
        kv(out, p + "bus_off", bstr(n.bus_off));
        kv(out, p + "silenced", bstr(n.silenced));
        kv(out, p + "signaling", bstr(n.signaling));
        kv_u64(out, p + "frames_ok", n.frames_ok);
        kv_u64(out, p + "deliveries", n.deliveries);
        kv_u64(out, p + "errors_raised", n.errors_raised);
    }
    return out;
}

bool train_scenario_baseline(const ScenarioConfig& cfg, const std::string& baseline_path,
                             std::string* err) {
    auto fail = [&](const std::string& m) {
        if (err) *err = m;
        return false;
    };
    if (!cfg.ids.enabled) return fail("ids must be enabled to train a baseline");
    if (cfg.ids.window_bits == 0) return fail("ids.window_bits must be positive to train");

    IdsConfig ic;
    if (cfg.ids.whitelist == "builtin:demo17") {
        ic.whitelist = demo_whitelist_17();
    } else {
        std::string werr;
        auto wl = Whitelist::load(resolve_path(cfg.base_dir, cfg.ids.whitelist), &werr);
        if (!wl) return fail("whitelist: " + werr);
        ic.whitelist = *wl;
    }
    ic.probe_pool = demo_probe_pool();
    ic.probes_enabled = false;  // training observes clean traffic only
    ic.window_bits = cfg.ids.window_bits;
    ic.aggregate_sigmas = cfg.ids.aggregate_sigmas;
    ic.ack_enabled = cfg.ids.ack;
    ic.seed = cfg.seed;

    BusConfig bc;
    bc.seed = cfg.seed;
    bc.q = cfg.q;
    bc.bit_rate = cfg.bit_rate;
    SimBus bus(bc);
    std::vector<std::unique_ptr<EcuNode>> ecus;
    int idx = 0;
    for (const NodeSpec& ns : cfg.nodes) {
        EcuConfig ec;
        ec.name = ns.name;
        ec.transmitter = ns.transmitter;
        ec.frame = ns.frame;
        ec.period_bits = ns.period_bits;
        ec.phase_bits = ns.phase_bits;
        ec.resistant = ns.resistant < 0 ? cfg.eref : ns.resistant != 0;
        ec.ack_enabled = ns.ack_enabled;
        ecus.push_back(std::make_unique<EcuNode>(ec));
        ecus.back()->set_index(idx++);
        bus.add_node(ecus.back().get());
    }
    IdsNode ids(ic);
    bus.add_node(&ids);
    bus.run(cfg.horizon_bits);

    std::string terr;
    auto base = train_baseline(ids, cfg.horizon_bits, &terr);
    if (!base) return fail(terr);
    if (!base->save(baseline_path)) return fail("cannot write " + baseline_path);
    return true;
}

// ----------------------------------------------------------- blind demo --

BlindSyncDemoResult blindsync_demo(double utilization, uint64_t trials, uint64_t seed) {
    Frame traffic;
    traffic.id = 0x1CF00400;
    traffic.extended = true;
    traffic.dlc = 4;
    traffic.data = {0xDE, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0};

    Frame payload;
    payload.id = 0x00000001;
    payload.extended = true;
    payload.dlc = 1;
    payload.data = {0x55, 0, 0, 0, 0, 0, 0, 0};

    uint64_t frame_len = frame_wire_bits(traffic);
    uint64_t period = 0;
    if (utilization > 0.0)
        period = static_cast<uint64_t>(std::llround(static_cast<double>(frame_len) / utilization));

    BlindSyncDemoResult out;
    out.utilization = utilization;
    out.trials = trials;
    out.idle_fraction =
        period ? 1.0 - static_cast<double>(frame_len) / static_cast<double>(period) : 1.0;

    Rng phase_rng(derive_seed(seed, 0xb11d));
    uint64_t synced_ok = 0;
    uint64_t unsynced_ok = 0;
    for (uint64_t t = 0; t < trials; ++t) {
        // steady-state phase: anywhere in one full period, two periods in
        uint64_t phase = period ? 2 * period + phase_rng.below(period)
                                : 20 + phase_rng.below(200);
        for (int mode = 0; mode < 2; ++mode) {
            BusConfig bc;
            bc.seed = derive_seed(seed, 2 * t + static_cast<uint64_t>(mode) + 1);
            bc.q = 1.0;
            SimBus bus(bc);

            std::unique_ptr<EcuNode> tx;
            if (period) {
                EcuConfig tc;
                tc.name = "tx";
                tc.transmitter = true;
                tc.frame = traffic;
                tc.period_bits = period;
                tx = std::make_unique<EcuNode>(tc);
                tx->set_index(0);
                bus.add_node(tx.get());
            }
            EcuConfig rc;
            rc.name = "rx";
            EcuNode rx(rc);
            rx.set_index(1);
            bus.add_node(&rx);

            BlindSyncAttacker::Config ac;
            ac.payload = payload;
            ac.start_bit = phase;
            ac.synced = mode == 0;
            BlindSyncAttacker atk(ac);
            bus.set_adversary(&atk);

            bus.run(phase + 700);
            bool got = false;
            for (const Frame& f : rx.delivered) got = got || f.id == payload.id;
            if (mode == 0 && got) synced_ok += 1;
            if (mode == 1 && got) unsynced_ok += 1;
        }
    }
    out.synced_rate = trials ? static_cast<double>(synced_ok) / static_cast<double>(trials) : 0.0;
    out.unsynced_rate =
        trials ? static_cast<double>(unsynced_ok) / static_cast<double>(trials) : 0.0;
    return out;
}

std::string format_blindsync_table(const BlindSyncDemoResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "utilization,trials,synced_rate,unsynced_rate,idle_fraction\n"
                  "%.4f,%" PRIu64 ",%.6f,%.6f,%.6f\n",
                  r.utilization, r.trials, r.synced_rate, r.unsynced_rate, r.idle_fraction);
    return buf;
}

}  // namespace cansim

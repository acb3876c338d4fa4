#include "core/ids.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cansim {

namespace {

int id_bit_count(bool extended) { return extended ? 29 : 11; }

void add_source(std::vector<uint8_t>& v, uint8_t s) {
    auto it = std::lower_bound(v.begin(), v.end(), s);
    if (it == v.end() || *it != s) v.insert(it, s);
}

std::string hex_id(uint32_t id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08X", id);
    return buf;
}

}  // namespace

bool Whitelist::contains(uint32_t id, bool extended) const {
    for (const Entry& e : entries)
        if (e.id == id && e.extended == extended) return true;
    return false;
}

std::vector<uint8_t> Whitelist::sources() const {
    std::vector<uint8_t> out;
    for (const Entry& e : entries) add_source(out, source_of_id(e.id, e.extended));
    return out;
}

std::optional<Whitelist> Whitelist::load(const std::string& path, std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open " + path;
        return std::nullopt;
    }
    Whitelist wl;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok, kind;
        if (!(ls >> tok)) continue;
        Entry e;
        e.id = static_cast<uint32_t>(std::strtoul(tok.c_str(), nullptr, 16));
        e.extended = true;
        if (ls >> kind) {
            if (kind == "std")
                e.extended = false;
            else if (kind != "ext") {
                if (err) *err = path + ":" + std::to_string(lineno) + ": bad id kind";
                return std::nullopt;
            }
        }
        uint32_t cap = e.extended ? 0x1FFFFFFF : 0x7FF;
        if (e.id > cap) {
            if (err) *err = path + ":" + std::to_string(lineno) + ": id out of range";
            return std::nullopt;
        }
        wl.entries.push_back(e);
    }
    if (wl.entries.empty()) {
        if (err) *err = path + ": empty whitelist";
        return std::nullopt;
    }
    return wl;
}

bool Whitelist::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) return false;
    for (const Entry& e : entries)
        out << hex_id(e.id) << (e.extended ? "" : " std") << "\n";
    return bool(out);
}

PrefixTree::PrefixTree(const Whitelist& wl) {
    nodes_.emplace_back();
    for (const auto& e : wl.entries) insert(e.id, e.extended);
}

void PrefixTree::insert(uint32_t id, bool extended) {
    int len = id_bit_count(extended);
    uint8_t src = source_of_id(id, extended);
    int cur = 0;
    add_source(nodes_[0].sources, src);
    for (int j = 0; j < len; ++j) {
        int b = (id >> (len - 1 - j)) & 1;
        if (nodes_[cur].child[b] < 0) {
            nodes_[cur].child[b] = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
        }
        cur = nodes_[cur].child[b];
        add_source(nodes_[cur].sources, src);
    }
}

std::vector<uint8_t> PrefixTree::candidates(uint32_t prefix, int len) const {
    int cur = 0;
    for (int j = 0; j < len; ++j) {
        int b = (prefix >> (len - 1 - j)) & 1;
        cur = nodes_[cur].child[b];
        if (cur < 0) return {};
    }
    return nodes_[cur].sources;
}

std::vector<uint8_t> brute_candidates(const Whitelist& wl, uint32_t prefix, int len) {
    std::vector<uint8_t> out;
    for (const auto& e : wl.entries) {
        int l = id_bit_count(e.extended);
        if (l < len) continue;
        if (len == 0 || (e.id >> (l - len)) == prefix)
            add_source(out, source_of_id(e.id, e.extended));
    }
    return out;
}

bool Baseline::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) return false;
    out << "canids-baseline v1\n";
    out << "window_bits " << window_bits << "\n";
    out << "windows " << windows_trained << "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "total %.6f %.6f\n", total.mean, total.sd);
    out << buf;
    for (const auto& [s, st] : per_source) {
        std::snprintf(buf, sizeof buf, "source %02X %.6f %.6f\n", s, st.mean, st.sd);
        out << buf;
    }
    for (const auto& [id, m] : id_interval) {
        std::snprintf(buf, sizeof buf, "interval %08X %.3f\n", id, m);
        out << buf;
    }
    return bool(out);
}

std::optional<Baseline> Baseline::load(const std::string& path, std::string* err) {
    std::ifstream in(path);
    if (!in) {
        if (err) *err = "cannot open " + path;
        return std::nullopt;
    }
    std::string header;
    if (!std::getline(in, header) || header != "canids-baseline v1") {
        if (err) *err = path + ": not a baseline file";
        return std::nullopt;
    }
    Baseline b;
    std::string key;
    while (in >> key) {
        if (key == "window_bits") {
            in >> b.window_bits;
        } else if (key == "windows") {
            in >> b.windows_trained;
        } else if (key == "total") {
            in >> b.total.mean >> b.total.sd;
        } else if (key == "source") {
            std::string hx;
            Stat st;
            in >> hx >> st.mean >> st.sd;
            b.per_source[static_cast<uint8_t>(std::strtoul(hx.c_str(), nullptr, 16))] = st;
        } else if (key == "interval") {
            std::string hx;
            double m;
            in >> hx >> m;
            b.id_interval[static_cast<uint32_t>(std::strtoul(hx.c_str(), nullptr, 16))] = m;
        } else {
            if (err) *err = path + ": unknown key " + key;
            return std::nullopt;
        }
    }
    if (b.window_bits == 0) {
        if (err) *err = path + ": missing window_bits";
        return std::nullopt;
    }
    return b;
}

const char* alert_kind_name(AlertKind k) {
    switch (k) {
        case AlertKind::UnknownId: return "UnknownId";
        case AlertKind::ShadowPassive: return "ShadowPassive";
        case AlertKind::ShadowBusOff: return "ShadowBusOff";
        case AlertKind::ProbeTampered: return "ProbeTampered";
        case AlertKind::AggregateDeviation: return "AggregateDeviation";
        case AlertKind::ReplayAnomaly: return "ReplayAnomaly";
    }
    return "?";
}

uint64_t draw_probe_gap(Rng& rng, uint64_t min_bits, uint64_t max_bits) {
    return min_bits + rng.below(max_bits - min_bits + 1);
}

IdsNode::IdsNode(IdsConfig cfg)
    : cfg_(std::move(cfg)), tree_(cfg_.whitelist), rng_(derive_seed(cfg_.seed, 0x70726f6265ull)) {}

int IdsNode::shadow(uint8_t source) const {
    auto it = shadows_.find(source);
    return it == shadows_.end() ? 0 : it->second.value;
}

uint64_t IdsNode::lifetime_errors(uint8_t source) const {
    auto it = shadows_.find(source);
    return it == shadows_.end() ? 0 : it->second.lifetime;
}

uint64_t IdsNode::good_frames(uint8_t source) const {
    auto it = shadows_.find(source);
    return it == shadows_.end() ? 0 : it->second.good;
}

int IdsNode::alert_count(AlertKind k) const {
    int n = 0;
    for (const Alert& a : alerts)
        if (a.kind == k) n += 1;
    return n;
}

std::map<uint32_t, double> IdsNode::interval_means() const {
    std::map<uint32_t, double> out;
    for (const auto& [id, st] : id_stats_)
        if (st.gaps >= 1) out[id] = st.mean_gap;
    return out;
}

void IdsNode::raise(AlertKind k, std::vector<uint8_t> sources, uint64_t bit, std::string detail) {
    alerts.push_back(Alert{k, std::move(sources), bit, std::move(detail)});
}

void IdsNode::push_snapshot(bool cleared) {
    Snapshot s;
    if (!cleared) {
        s.in_frame = dec_.in_frame();
        s.id_complete = dec_.id_complete();
        s.id = dec_.id_value();
        s.extended = dec_.extended();
        const auto& bits = dec_.id_prefix_bits();
        s.prefix_len = static_cast<int>(bits.size());
        for (uint8_t b : bits) s.prefix = (s.prefix << 1) | b;
    }
    ring_.push_back(s);
    if (ring_.size() > 8) ring_.pop_front();
}

IdsNode::Snapshot IdsNode::context_back(size_t bits_back) const {
    if (ring_.size() <= bits_back) return {};
    return ring_[ring_.size() - 1 - bits_back];
}

void IdsNode::charge(uint8_t source, uint64_t inferred_bit) {
    Shadow& sh = shadows_[source];
    sh.value += 8;
    sh.lifetime += 1;
    if (sh.value > 127 && !sh.passive_alerted) {
        sh.passive_alerted = true;
        raise(AlertKind::ShadowPassive, {source}, inferred_bit,
              "shadow counter " + std::to_string(sh.value));
    }
    if (sh.value > 255 && !sh.busoff_alerted) {
        sh.busoff_alerted = true;
        raise(AlertKind::ShadowBusOff, {source}, inferred_bit,
              "shadow counter " + std::to_string(sh.value));
    }
}

void IdsNode::signature_event(uint64_t inferred_bit, bool passive, const Snapshot& snap) {
    std::vector<uint8_t> sources;
    bool provisional = false;
    // attribution needs at least one observed identifier bit; a frame
    // context with an empty prefix carries no evidence at all
    if (snap.in_frame && (snap.id_complete || snap.prefix_len > 0)) {
        if (snap.id_complete) {
            sources = {source_of_id(snap.id, snap.extended)};
        } else {
            sources = tree_.candidates(snap.prefix, snap.prefix_len);
            provisional = sources.size() > 1;
        }
    }
    window_total_ += 1;
    for (uint8_t s : sources) charge(s, inferred_bit);
    // per-source rate statistics take unambiguous attributions only; an
    // ambiguous charge split over several candidates would let a single
    // event trip every candidate's window threshold at once. Ambiguous
    // and unattributed events still count in the window total above.
    if (sources.size() == 1) shadows_[sources[0]].window_count += 1;

    LedgerEvent ev;
    ev.bit = inferred_bit;
    ev.passive_sig = passive;
    ev.provisional = provisional;
    ev.sources = sources;
    ledger_events.push_back(ev);

    if (!sources.empty() && snap.in_frame) {
        Pending p;
        p.event_idx = ledger_events.size() - 1;
        p.error_bit = inferred_bit;
        p.frame_start = cur_sof_bit_;
        p.horizon_end = inferred_bit + cfg_.replay_horizon_bits;
        if (snap.id_complete) {
            p.prefix = snap.id;
            p.prefix_len = id_bit_count(snap.extended);
        } else {
            p.prefix = snap.prefix;
            p.prefix_len = snap.prefix_len;
        }
        p.sources = sources;
        pending_.push_back(p);
    }
}

double IdsNode::expected_interval(uint32_t id) const {
    if (cfg_.baseline) {
        auto it = cfg_.baseline->id_interval.find(id);
        if (it != cfg_.baseline->id_interval.end()) return it->second;
    }
    auto it = id_stats_.find(id);
    if (it != id_stats_.end() && it->second.gaps >= 1) return it->second.mean_gap;
    return 0.0;
}

void IdsNode::on_id_complete(uint64_t now) {
    if (own_frame_) return;
    uint32_t id = dec_.id_value();
    bool ext = dec_.extended();
    int len = id_bit_count(ext);

    if (!cfg_.whitelist.contains(id, ext)) {
        unknown_ids_seen += 1;
        raise(AlertKind::UnknownId, {}, now, "id " + hex_id(id));
    }

    uint64_t s2 = cur_sof_bit_;
    IdStat& st = id_stats_[id];
    double exp_gap = expected_interval(id);
    // two replay signals: the id recurs far inside its usual interval, or the
    // appearance that died sat squarely in this id's expected schedule slot
    // and the id came straight back after the error
    bool quick = st.has_last && exp_gap > 0.0 &&
                 static_cast<double>(s2 - st.last_start) < cfg_.replay_fraction * exp_gap;

    {
        uint8_t s_star = source_of_id(id, ext);
        for (auto it = pending_.begin(); it != pending_.end();) {
            Pending& p = *it;
            bool prefix_ok = p.prefix_len <= len &&
                             (p.prefix_len == 0 || (id >> (len - p.prefix_len)) == p.prefix);
            bool ours = std::find(p.sources.begin(), p.sources.end(), s_star) != p.sources.end();
            bool slot = st.has_last && exp_gap > 0.0 &&
                        std::abs(static_cast<double>(p.frame_start) -
                                 (static_cast<double>(st.last_start) + exp_gap)) <= 0.25 * exp_gap;
            if (now <= p.horizon_end && prefix_ok && ours && (quick || slot)) {
                LedgerEvent& ev = ledger_events[p.event_idx];
                ev.replay_source = s_star;
                if (ev.provisional) {
                    for (uint8_t s : p.sources) {
                        if (s == s_star) continue;
                        Shadow& sh = shadows_[s];
                        sh.value = std::max(0, sh.value - 8);
                        if (sh.value <= 127) sh.passive_alerted = false;
                    }
                    raise(AlertKind::ReplayAnomaly, {s_star}, s2,
                          "error at bit " + std::to_string(p.error_bit) + " attributed by replay of id " +
                              hex_id(id));
                }
                it = pending_.erase(it);
            } else {
                ++it;
            }
        }
    }

    if (st.has_last) {
        double gap = static_cast<double>(s2 - st.last_start);
        if (st.gaps == 0)
            st.mean_gap = gap;
        else
            st.mean_gap += 0.3 * (gap - st.mean_gap);
        st.gaps += 1;
    }
    st.has_last = true;
    st.last_start = s2;
}

void IdsNode::on_frame_complete(uint64_t /*now*/) {
    if (own_frame_) {
        own_frame_ = false;
        return;
    }
    frames_good += 1;
    uint32_t id = dec_.frame().id;
    bool ext = dec_.frame().extended;
    if (cfg_.whitelist.contains(id, ext)) {
        Shadow& sh = shadows_[source_of_id(id, ext)];
        sh.value = std::max(0, sh.value - 1);
        sh.good += 1;
        if (sh.value <= 127) sh.passive_alerted = false;
    }
}

void IdsNode::handle_own_tx(BusContext& ctx, BusLevel resolved, bool& abandoned) {
    const TaggedBit& tb = tx_bits_.bits[tx_pos_];
    if (tb.level == BusLevel::dominant && resolved == BusLevel::recessive) {
        raise(AlertKind::ProbeTampered, {}, ctx.bit,
              "probe " + hex_id(tx_id_) + " dominant bit flipped");
        tx_active_ = false;
        own_frame_ = false;
        suppress_ = true;
        abandoned = true;
        return;
    }
    if (tb.level == BusLevel::recessive && resolved == BusLevel::dominant) {
        if (tb.field == Field::Arbitration) {
            // lost arbitration to legitimate traffic: defer, keep decoding
            tx_active_ = false;
            own_frame_ = false;
            probe_pending_ = true;
            return;
        }
        if (tb.field != Field::AckSlot) {
            raise(AlertKind::ProbeTampered, {}, ctx.bit,
                  "probe " + hex_id(tx_id_) + " recessive bit overwritten");
            tx_active_ = false;
            own_frame_ = false;
            suppress_ = true;
            abandoned = true;
            return;
        }
    }
    probe_tx_bits += 1;
    if (tx_pos_ + 1 == tx_bits_.eof_end()) {
        probes_completed += 1;
        tx_active_ = false;
        // own_frame_ cleared by on_frame_complete this same bit
    } else {
        tx_pos_ += 1;
        next_drive_ = tx_bits_.bits[tx_pos_].level == BusLevel::dominant ? kDriveDominant
                                                                         : kDriveRecessive;
    }
}

void IdsNode::maybe_launch_probe(uint64_t now) {
    if (!cfg_.probes_enabled || cfg_.probe_pool.empty() || tx_active_ || suppress_) return;
    if (!probe_scheduled_) {
        uint64_t gap = draw_probe_gap(rng_, cfg_.probe_min_bits, cfg_.probe_max_bits);
        probe_gaps.push_back(gap);
        next_probe_at_ = gap;
        probe_scheduled_ = true;
    }
    if (now + 1 < next_probe_at_ && !probe_pending_) return;
    if (dec_.in_frame()) return;
    if (!(run_level_ == BusLevel::recessive && run_len_ >= 11)) return;

    Frame pf;
    pf.id = cfg_.probe_pool[rng_.below(cfg_.probe_pool.size())];
    pf.extended = true;
    pf.dlc = 0;
    tx_id_ = pf.id;
    tx_bits_ = encode_frame(pf);
    tx_pos_ = 0;
    tx_active_ = true;
    own_frame_ = true;
    probe_pending_ = false;
    probes_sent += 1;
    next_drive_ = kDriveDominant;  // SOF, counted when it resolves

    uint64_t gap = draw_probe_gap(rng_, cfg_.probe_min_bits, cfg_.probe_max_bits);
    probe_gaps.push_back(gap);
    next_probe_at_ = now + 1 + gap;
}

void IdsNode::roll_windows(uint64_t now) {
    if (cfg_.window_bits == 0) return;
    uint64_t w = now / cfg_.window_bits;
    while (window_index_ < w) {
        evaluate_window((window_index_ + 1) * cfg_.window_bits - 1, false);
        window_index_ += 1;
    }
}

void IdsNode::evaluate_window(uint64_t end_bit, bool partial) {
    if (cfg_.baseline) {
        const Baseline& b = *cfg_.baseline;
        for (auto& [s, sh] : shadows_) {
            if (sh.window_count == 0) continue;
            Baseline::Stat st;  // sources unseen in training alert on any error
            auto it = b.per_source.find(s);
            if (it != b.per_source.end()) st = it->second;
            if (sh.window_count > st.mean + cfg_.aggregate_sigmas * st.sd) {
                raise(AlertKind::AggregateDeviation, {s}, end_bit,
                      std::string(partial ? "partial " : "") + "window count " +
                          std::to_string(sh.window_count));
            }
        }
        if (window_total_ > b.total.mean + cfg_.aggregate_sigmas * b.total.sd) {
            raise(AlertKind::AggregateDeviation, {}, end_bit,
                  std::string(partial ? "partial " : "") + "window total " +
                      std::to_string(window_total_));
        }
    }
    for (auto& [s, sh] : shadows_) sh.window_count = 0;
    window_total_ = 0;
}

void IdsNode::finalize(uint64_t now_bit) {
    roll_windows(now_bit);
    evaluate_window(now_bit, true);
}

void IdsNode::on_bit(BusContext& ctx, BusLevel resolved) {
    uint64_t now = ctx.bit;
    roll_windows(now);

    if (run_len_ == 0 || resolved != run_level_) {
        run_level_ = resolved;
        run_len_ = 1;
    } else {
        run_len_ += 1;
    }

    next_drive_ = kDriveSilent;

    bool abandoned = false;
    if (tx_active_) handle_own_tx(ctx, resolved, abandoned);

    if (suppress_) {
        push_snapshot(true);
        if (run_level_ == BusLevel::recessive && run_len_ >= 11) {
            suppress_ = false;
            dec_.reset();
            prev_in_frame_ = false;
            prev_id_complete_ = false;
        }
    } else {
        push_snapshot(false);
        FrameDecoder::Step st = dec_.feed(resolved);
        if (st.event == FrameDecoder::Event::error) {
            // a six-recessive run inside the stuffed region is the
            // signature of a transmitter's passive flag; the bit that
            // silenced it precedes the run
            if (st.error == ErrorKind::Stuff && run_level_ == BusLevel::recessive &&
                run_len_ >= 6)
                signature_event(now - 6, true, context_back(6));
            // other decode anomalies carry no charge on their own
            suppress_ = true;
            prev_in_frame_ = false;
            prev_id_complete_ = false;
        } else {
            if (dec_.in_frame() && !prev_in_frame_) cur_sof_bit_ = now;
            bool idc = dec_.in_frame() && dec_.id_complete();
            if (idc && !prev_id_complete_) on_id_complete(now);
            if (st.event == FrameDecoder::Event::complete) on_frame_complete(now);
            prev_in_frame_ = dec_.in_frame();
            prev_id_complete_ = dec_.in_frame() && dec_.id_complete();
        }
    }

    // raw wire scanner: six consecutive dominant bits are an active
    // error flag no legal frame can contain
    if (run_level_ == BusLevel::dominant && run_len_ == 6)
        signature_event(now - 5, false, context_back(5));

    if (!pending_.empty()) {
        pending_.erase(std::remove_if(pending_.begin(), pending_.end(),
                                      [&](const Pending& p) { return now > p.horizon_end; }),
                       pending_.end());
    }

    if (!tx_active_) {
        if (!suppress_ && cfg_.ack_enabled && dec_.ack_due_next())
            next_drive_ = kDriveDominant;
        maybe_launch_probe(now);
    }
    (void)abandoned;
}

std::optional<Baseline> train_baseline(const IdsNode& ids, uint64_t total_bits,
                                       std::string* err) {
    const IdsConfig& cfg = ids.config();
    if (cfg.window_bits == 0) {
        if (err) *err = "window_bits is zero";
        return std::nullopt;
    }
    uint64_t windows = total_bits / cfg.window_bits;
    if (windows < static_cast<uint64_t>(cfg.min_training_windows)) {
        if (err)
            *err = "InsufficientTraining: " + std::to_string(windows) + " full windows, need " +
                   std::to_string(cfg.min_training_windows);
        return std::nullopt;
    }

    std::map<uint8_t, std::vector<int>> counts;
    for (uint8_t s : cfg.whitelist.sources()) counts[s] = std::vector<int>(windows, 0);
    std::vector<int> total(windows, 0);
    for (const LedgerEvent& ev : ids.ledger_events) {
        uint64_t w = ev.bit / cfg.window_bits;
        if (w >= windows) continue;  // partial tail window
        total[w] += 1;
        for (uint8_t s : ev.sources) {
            auto it = counts.find(s);
            if (it != counts.end()) it->second[w] += 1;
        }
    }

    auto stat_of = [&](const std::vector<int>& v) {
        Baseline::Stat st;
        double n = static_cast<double>(v.size());
        for (int x : v) st.mean += x;
        st.mean /= n;
        double var = 0;
        for (int x : v) var += (x - st.mean) * (x - st.mean);
        st.sd = std::sqrt(var / n);
        return st;
    };

    Baseline b;
    b.window_bits = cfg.window_bits;
    b.windows_trained = static_cast<int>(windows);
    b.total = stat_of(total);
    for (const auto& [s, v] : counts) b.per_source[s] = stat_of(v);
    b.id_interval = ids.interval_means();
    return b;
}

bool write_alerts_jsonl(const std::string& path, const std::vector<Alert>& alerts) {
    std::ofstream out(path);
    if (!out) return false;
    for (const Alert& a : alerts) {
        out << "{\"bit\":" << a.bit_index << ",\"kind\":\"" << alert_kind_name(a.kind)
            << "\",\"sources\":[";
        for (size_t i = 0; i < a.sources.size(); ++i)
            out << (i ? "," : "") << static_cast<int>(a.sources[i]);
        out << "],\"detail\":\"";
        for (char c : a.detail) {
            if (c == '"' || c == '\\') out << '\\';
            out << c;
        }
        out << "\"}\n";
    }
    return bool(out);
}

Whitelist demo_whitelist_17() {
    // Constructed so the id-prefix narrowing runs 17 -> 8 -> 6 -> 2 -> 1:
    // eight sources under priority 000, six of those under 0000, two
    // under 00000, one under 000000. Sources are the trailing bytes.
    static const uint32_t ids[17] = {
        0x0040A011, 0x0080B012, 0x0100C013, 0x0110C014, 0x0120C015, 0x0130C016,
        0x0200D017, 0x0300D018,  // the 000 branch
        0x1CF00400,              // stealthy-attack victim, source 0x00
        0x04F11031, 0x08F21032, 0x0CF31033, 0x10F41034, 0x14F51035, 0x18F61036,
        0x18FF0010,              // bus-driving emulation target
        0x1CE00677,
    };
    Whitelist wl;
    for (uint32_t id : ids) wl.entries.push_back({id, true});
    return wl;
}

std::vector<uint32_t> demo_probe_pool() {
    // unused, 000-prefixed, beat every whitelisted id in arbitration
    return {0x00000003, 0x00000005, 0x00000006};
}

}  // namespace cansim

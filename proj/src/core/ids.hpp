#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/bus.hpp"
#include "core/decoder.hpp"
#include "core/frame.hpp"
#include "core/rng.hpp"

namespace cansim {

// J1939-style source address: the trailing byte of an extended id.
// Standard ids map through their low byte as well; the shipped
// fixtures are extended-only.
inline uint8_t source_of_id(uint32_t id, bool /*extended*/) {
    return static_cast<uint8_t>(id & 0xFF);
}

struct Whitelist {
    struct Entry {
        uint32_t id = 0;
        bool extended = true;
    };
    std::vector<Entry> entries;

    bool contains(uint32_t id, bool extended) const;
    std::vector<uint8_t> sources() const;  // sorted, deduplicated

    // one id per line: hex, optional "std" suffix for 11-bit ids
    static std::optional<Whitelist> load(const std::string& path, std::string* err = nullptr);
    bool save(const std::string& path) const;
};

// Binary trie over arbitration-id bit strings (msb first, 11 or 29
// bits). Each node carries the set of source addresses reachable
// below it, so candidates() is a single walk.
class PrefixTree {
  public:
    PrefixTree() { nodes_.emplace_back(); }
    explicit PrefixTree(const Whitelist& wl);

    void insert(uint32_t id, bool extended);

    // prefix packed msb-first into the low `len` bits
    std::vector<uint8_t> candidates(uint32_t prefix, int len) const;
    std::vector<uint8_t> all_sources() const { return candidates(0, 0); }

  private:
    struct TNode {
        std::vector<uint8_t> sources;
        int child[2] = {-1, -1};
    };
    std::vector<TNode> nodes_;
};

// Reference filter for property tests: sources of whitelist ids that
// start with the given prefix.
std::vector<uint8_t> brute_candidates(const Whitelist& wl, uint32_t prefix, int len);

struct Baseline {
    uint64_t window_bits = 0;
    int windows_trained = 0;
    struct Stat {
        double mean = 0.0;
        double sd = 0.0;
    };
    Stat total;
    std::map<uint8_t, Stat> per_source;
    std::map<uint32_t, double> id_interval;  // mean bits between frame starts

    bool save(const std::string& path) const;
    static std::optional<Baseline> load(const std::string& path, std::string* err = nullptr);
};

enum class AlertKind : uint8_t {
    UnknownId,
    ShadowPassive,
    ShadowBusOff,
    ProbeTampered,
    AggregateDeviation,
    ReplayAnomaly,
};

const char* alert_kind_name(AlertKind k);

struct Alert {
    AlertKind kind;
    std::vector<uint8_t> sources;  // attributed source set, possibly empty
    uint64_t bit_index = 0;        // trace evidence
    std::string detail;
};

// One observed error signature on the wire.
struct LedgerEvent {
    uint64_t bit = 0;        // inferred error bit
    bool passive_sig = false;
    bool provisional = false;
    std::vector<uint8_t> sources;
    int replay_source = -1;  // filled by the replay heuristic when it resolves
};

struct IdsConfig {
    std::string name = "ids";
    Whitelist whitelist;
    std::vector<uint32_t> probe_pool;  // unused extended ids, 000-prefixed
    bool probes_enabled = false;
    uint64_t probe_min_bits = 250000;   // 1 s at 250 kbit/s
    uint64_t probe_max_bits = 1250000;  // 5 s
    uint64_t seed = 1;
    double replay_fraction = 0.5;        // "quickly" = under half the expected interval
    uint64_t replay_horizon_bits = 2000;
    uint64_t window_bits = 2500000;      // aggregate window, 10 s
    double aggregate_sigmas = 3.0;
    int min_training_windows = 3;
    bool ack_enabled = true;
    std::optional<Baseline> baseline;    // absent: aggregate detector off
};

uint64_t draw_probe_gap(Rng& rng, uint64_t min_bits, uint64_t max_bits);

// The monitoring node. Privileged tap: decodes every bit, watches raw
// level runs for error-flag signatures, never signals errors itself,
// acknowledges valid frames, and optionally injects probe frames.
class IdsNode final : public Node {
  public:
    explicit IdsNode(IdsConfig cfg);

    const char* name() const override { return cfg_.name.c_str(); }
    int8_t driven() const override { return next_drive_; }
    void on_bit(BusContext& ctx, BusLevel resolved) override;

    // evaluates the current partial aggregate window; call at run end
    void finalize(uint64_t now_bit);

    const IdsConfig& config() const { return cfg_; }
    int shadow(uint8_t source) const;
    uint64_t lifetime_errors(uint8_t source) const;
    uint64_t good_frames(uint8_t source) const;
    int alert_count(AlertKind k) const;
    std::map<uint32_t, double> interval_means() const;

    std::vector<Alert> alerts;
    std::vector<LedgerEvent> ledger_events;
    uint64_t frames_good = 0;
    uint64_t unknown_ids_seen = 0;
    uint64_t probes_sent = 0;
    uint64_t probes_completed = 0;
    uint64_t probe_tx_bits = 0;
    std::vector<uint64_t> probe_gaps;  // drawn start-to-start intervals

  private:
    struct Snapshot {
        bool in_frame = false;
        bool id_complete = false;
        uint32_t id = 0;
        bool extended = false;
        uint32_t prefix = 0;
        int prefix_len = 0;
    };
    struct Shadow {
        int value = 0;
        uint64_t lifetime = 0;
        uint64_t good = 0;
        int window_count = 0;
        bool passive_alerted = false;
        bool busoff_alerted = false;
    };
    struct Pending {
        size_t event_idx;
        uint64_t error_bit;
        uint64_t frame_start;  // SOF of the appearance that died
        uint64_t horizon_end;
        uint32_t prefix;
        int prefix_len;
        std::vector<uint8_t> sources;
    };
    struct IdStat {
        bool has_last = false;
        uint64_t last_start = 0;
        double mean_gap = 0.0;
        int gaps = 0;
    };

    void push_snapshot(bool cleared);
    Snapshot context_back(size_t bits_back) const;
    void signature_event(uint64_t inferred_bit, bool passive, const Snapshot& ctx_snap);
    void charge(uint8_t source, uint64_t inferred_bit);
    void on_id_complete(uint64_t now);
    void on_frame_complete(uint64_t now);
    void maybe_launch_probe(uint64_t now);
    void handle_own_tx(BusContext& ctx, BusLevel resolved, bool& fed);
    void roll_windows(uint64_t now);
    void evaluate_window(uint64_t end_bit, bool partial);
    double expected_interval(uint32_t id) const;
    void raise(AlertKind k, std::vector<uint8_t> sources, uint64_t bit, std::string detail);

    IdsConfig cfg_;
    PrefixTree tree_;
    Rng rng_;

    FrameDecoder dec_;
    bool suppress_ = false;  // realigning after a decode anomaly
    BusLevel run_level_ = BusLevel::recessive;
    int run_len_ = 0;
    std::deque<Snapshot> ring_;
    bool prev_in_frame_ = false;
    bool prev_id_complete_ = false;
    uint64_t cur_sof_bit_ = 0;

    int8_t next_drive_ = kDriveSilent;

    bool tx_active_ = false;
    bool own_frame_ = false;
    bool probe_pending_ = false;  // lost arbitration, retry at next idle
    FrameBits tx_bits_;
    size_t tx_pos_ = 0;
    uint32_t tx_id_ = 0;
    uint64_t next_probe_at_ = 0;
    bool probe_scheduled_ = false;

    std::map<uint8_t, Shadow> shadows_;
    std::vector<Pending> pending_;
    std::map<uint32_t, IdStat> id_stats_;

    uint64_t window_index_ = 0;
    int window_total_ = 0;
};

// Offline training over a finished clean run.
std::optional<Baseline> train_baseline(const IdsNode& ids, uint64_t total_bits,
                                       std::string* err = nullptr);

bool write_alerts_jsonl(const std::string& path, const std::vector<Alert>& alerts);

// The 17-source synthetic whitelist reproducing the 17-8-6-2-1
// narrowing chain, and the matching unused probe ids.
Whitelist demo_whitelist_17();
std::vector<uint32_t> demo_probe_pool();

}  // namespace cansim

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/frame.hpp"
#include "core/ids.hpp"

namespace cansim {

// One simulated ECU as declared in a scenario file.
struct NodeSpec {
    std::string name;
    bool transmitter = false;
    Frame frame;
    uint64_t period_bits = 0;
    uint64_t phase_bits = 0;
    int resistant = -1;  // -1: follow the bus eref flag
    bool ack_enabled = true;
};

struct AttackerSpec {
    // none | traditional | stealthy | blind-sync | drive-bus | cascade
    std::string strategy = "none";
    std::string victim;  // node name (traditional, stealthy)
    uint32_t pace = 1;
    uint64_t start_bit = 11;
    uint64_t gap_bits = 20;
    bool synced = true;
    // blind-sync injection frame, cascade frame, or the drive-bus
    // emulation entry (drive-bus falls back to the transmitter roster)
    Frame payload;
    bool has_payload = false;
};

struct IdsSpec {
    bool enabled = false;
    std::string whitelist = "builtin:demo17";  // or a file path
    bool ack = true;
    bool probes = false;
    uint64_t probe_min_bits = 250000;
    uint64_t probe_max_bits = 1250000;
    uint64_t window_bits = 0;
    double aggregate_sigmas = 3.0;
    std::string baseline;  // optional trained-baseline path
};

struct OutputSpec {
    std::string trace = "trace.jsonl";
    std::string alerts = "alerts.jsonl";
    std::string report = "report.csv";
    uint64_t trace_limit_bits = 0;  // 0: record the full horizon
};

// Parsed scenario file. The seed and a positive horizon are mandatory;
// everything else has defaults.
struct ScenarioConfig {
    double bit_rate = 250000.0;
    bool eref = false;
    uint64_t horizon_bits = 0;
    uint64_t seed = 0;
    double q = 1.0;

    std::vector<NodeSpec> nodes;
    AttackerSpec attacker;
    IdsSpec ids;
    OutputSpec outputs;

    std::string base_dir;  // directory of the config file, for relative paths
};

// Key/value tree in a TOML-like surface: [section] headers, [[nodes]]
// array-of-tables, `key = value` lines with integers (decimal or 0x),
// floats, booleans, quoted strings and [int, ...] arrays, # comments.
// Unknown sections or keys are errors, as are missing seed/horizon.
std::optional<ScenarioConfig> parse_scenario(const std::string& text, std::string* err);
std::optional<ScenarioConfig> load_scenario(const std::string& path, std::string* err);

struct NodeSummary {
    std::string name;
    bool transmitter = false;
    int tec = 0;
    int rec = 0;
    bool bus_off = false;
    bool silenced = false;
    bool signaling = false;
    uint64_t frames_ok = 0;
    uint64_t deliveries = 0;
    uint64_t errors_raised = 0;
    uint64_t busoff_bit = UINT64_MAX;
};

// Everything the report serializes; attack verdicts live here and in the
// artifacts, never in exit codes.
struct RunResult {
    uint64_t bits_elapsed = 0;
    bool victim_bus_off = false;
    uint64_t victim_busoff_bit = UINT64_MAX;
    uint64_t completed_error_frames = 0;
    uint64_t receiver_errors = 0;
    uint64_t unknown_ids = 0;
    uint64_t ids_alerts = 0;
    bool attacker_failed = false;
    std::string attacker_note;
    std::vector<std::pair<std::string, std::string>> extras;  // per strategy
    std::vector<NodeSummary> nodes;
};

// Runs one scenario and writes the trace/alerts/report artifacts under
// out_dir. Returns nullopt (and *err) on config or IO failure; artifacts
// are only written when the run itself succeeds.
std::optional<RunResult> run_scenario(const ScenarioConfig& cfg, const std::string& out_dir,
                                      std::string* err);

// Serialized form of the report, shared by run_scenario and tests.
std::string format_report_csv(const ScenarioConfig& cfg, const RunResult& r);

// Clean-traffic training pass: same roster, no attacker, aggregate
// baseline trained over horizon_bits and saved to baseline_path.
bool train_scenario_baseline(const ScenarioConfig& cfg, const std::string& baseline_path,
                             std::string* err);

// Blind injection success rates at a given bus utilization: one periodic
// transmitter sized so in-frame bits / period == utilization, attack start
// phases uniform over a steady-state period.
struct BlindSyncDemoResult {
    double utilization = 0.0;
    uint64_t trials = 0;
    double synced_rate = 0.0;
    double unsynced_rate = 0.0;
    double idle_fraction = 0.0;  // exact, from the configured period
};

BlindSyncDemoResult blindsync_demo(double utilization, uint64_t trials, uint64_t seed);
std::string format_blindsync_table(const BlindSyncDemoResult& r);

}  // namespace cansim

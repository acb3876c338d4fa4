#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace cansim {

enum class AnnKind : uint8_t {
    error,        // node raised a bus error (node, role, error)
    frame_start,  // node began transmitting (node, id)
    frame_ok,     // transmitter saw its frame complete (node, id)
    delivery,     // receiver delivered a frame (node, id)
    mode_change,  // fault confinement mode changed (node, mode)
    alert,        // IDS raised an alert (label)
    attack,       // adversary bookkeeping (label)
    probe,        // IDS probe transmission began (id)
};

// Transmitter/receiver distinction for error annotations.
enum class ErrorRole : uint8_t { transmitter = 0, receiver = 1 };

struct Annotation {
    AnnKind kind;
    int16_t node = -1;
    ErrorRole role = ErrorRole::transmitter;
    ErrorKind error = ErrorKind::BitMonitoring;
    EcuMode mode = EcuMode::error_active;
    uint32_t id = 0;
    const char* label = nullptr;  // static string for alert/attack kinds
};

// Drive levels as recorded per node per bit.
constexpr int8_t kDriveDominant = 0;
constexpr int8_t kDriveRecessive = 1;
constexpr int8_t kDriveSilent = 2;

struct TraceEvent {
    uint64_t bit;
    BusLevel resolved;
    bool flip_attempted;
    bool flip_succeeded;
    std::vector<int8_t> driven;
    std::vector<Annotation> anns;
};

// Incremental detector for completed active-form error frames on the wire:
// a dominant run of length >= 6 followed by 8 consecutive recessive bits.
struct ErrorFrameScanner {
    int dom_run = 0;
    int rec_need = 0;
    uint64_t completed = 0;

    void feed(BusLevel b) {
        if (b == BusLevel::dominant) {
            dom_run += 1;
            rec_need = 0;
        } else {
            if (dom_run >= 6) rec_need = 8;
            dom_run = 0;
            if (rec_need > 0 && --rec_need == 0) completed += 1;
        }
    }
};

class TraceSink {
  public:
    virtual ~TraceSink() = default;
    virtual void on_bit(uint64_t bit, BusLevel resolved, bool flip_attempted,
                        bool flip_succeeded, const int8_t* driven, size_t n) = 0;
    // Refers to the bit most recently passed to on_bit.
    virtual void annotate(const Annotation& a) = 0;
};

// Aggregates counters without materialising per-bit events; cheap enough
// for multi-million-bit runs.
class CountingSink : public TraceSink {
  public:
    void on_bit(uint64_t bit, BusLevel resolved, bool flip_attempted,
                bool flip_succeeded, const int8_t* driven, size_t n) override;
    void annotate(const Annotation& a) override;

    uint64_t bits = 0;
    uint64_t flips_attempted = 0;
    uint64_t flips_succeeded = 0;
    uint64_t errors_total = 0;
    uint64_t receiver_errors = 0;
    uint64_t deliveries = 0;
    uint64_t alerts = 0;
    uint64_t frames_ok = 0;
    ErrorFrameScanner scanner;
};

// Records the full bit-level trace; intended for short demonstration runs
// and tests.
class RecordingSink : public TraceSink {
  public:
    void on_bit(uint64_t bit, BusLevel resolved, bool flip_attempted,
                bool flip_succeeded, const int8_t* driven, size_t n) override;
    void annotate(const Annotation& a) override;

    std::vector<TraceEvent> events;
    CountingSink totals;  // kept in lockstep for convenience
};

// Forwards to two sinks.
class TeeSink : public TraceSink {
  public:
    TeeSink(TraceSink* a, TraceSink* b) : a_(a), b_(b) {}
    void on_bit(uint64_t bit, BusLevel resolved, bool fa, bool fs,
                const int8_t* driven, size_t n) override {
        if (a_) a_->on_bit(bit, resolved, fa, fs, driven, n);
        if (b_) b_->on_bit(bit, resolved, fa, fs, driven, n);
    }
    void annotate(const Annotation& a) override {
        if (a_) a_->annotate(a);
        if (b_) b_->annotate(a);
    }

  private:
    TraceSink* a_;
    TraceSink* b_;
};

// One JSON object per line, schema documented in the README.
bool write_trace_jsonl(const std::string& path, const std::vector<TraceEvent>& events,
                       const std::vector<std::string>& node_names);
// Columns: bit,resolved,errors_cum
bool write_trace_csv(const std::string& path, const std::vector<TraceEvent>& events);

}  // namespace cansim

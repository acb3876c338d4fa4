#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/trace.hpp"
#include "core/types.hpp"

namespace cansim {

struct BusContext {
    uint64_t bit;
    TraceSink* sink;
    void annotate(const Annotation& a) {
        if (sink) sink->annotate(a);
    }
};

// A bus participant. driven() is polled once at the start of each bit time
// and must return the level decided during the previous on_bit call; the
// resolved level is then broadcast through on_bit, where the node prepares
// its drive for the next bit.
class Node {
  public:
    virtual ~Node() = default;
    virtual const char* name() const = 0;
    virtual int8_t driven() const = 0;  // kDriveDominant/kDriveRecessive/kDriveSilent
    virtual void on_bit(BusContext& ctx, BusLevel resolved) = 0;
};

enum class FlipKind : uint8_t {
    none,
    toggle,        // recessive base -> dominant (certain); dominant base -> recessive w.p. q
    to_recessive,  // dominant base -> recessive w.p. q; recessive base -> no-op, no draw
};

struct FlipOutcome {
    bool attempted = false;
    bool succeeded = false;
    BusLevel resolved = BusLevel::recessive;
};

// Wired-AND of all driven levels; silence counts as recessive.
BusLevel resolve_level(const int8_t* driven, size_t n);

// Applies one adversary flip attempt to the base level. Exactly one
// Bernoulli draw is consumed when the attempt is probabilistic (dominant
// base); deterministic cases consume none.
FlipOutcome apply_flip(BusLevel base, FlipKind kind, double q, Rng& rng);

// A node with the physical-layer flip capability. flip_request() is polled
// alongside driven(); at most one flip lands per bit.
class AdversaryNode : public Node {
  public:
    virtual FlipKind flip_request() const { return FlipKind::none; }
};

struct BusConfig {
    uint64_t seed = 0;
    double q = 1.0;             // flip success probability on dominant bases
    double bit_rate = 250000.0; // bits per simulated second
};

class SimBus {
  public:
    explicit SimBus(const BusConfig& cfg);

    void add_node(Node* n) { nodes_.push_back(n); }
    // The adversary participates like any node (it may drive bits) and
    // additionally owns the flip channel.
    void set_adversary(AdversaryNode* a) {
        adv_ = a;
        nodes_.push_back(a);
    }
    void set_sink(TraceSink* s) { sink_ = s; }

    void step();
    // Runs until max_bits or until halt() returns true; returns bit count.
    uint64_t run(uint64_t max_bits, const std::function<bool()>& halt = {});

    uint64_t now() const { return bit_; }
    const BusConfig& config() const { return cfg_; }
    const std::vector<Node*>& nodes() const { return nodes_; }

  private:
    BusConfig cfg_;
    std::vector<Node*> nodes_;
    AdversaryNode* adv_ = nullptr;
    TraceSink* sink_ = nullptr;
    Rng flip_rng_;
    uint64_t bit_ = 0;
    std::vector<int8_t> scratch_;
};

// Per-bit transmit eligibility over a resolved-level stream: true once 11
// consecutive recessive bits have been seen, or 3 intermission bits after a
// completed frame. Element i reports eligibility after observing bits 0..i.
std::vector<uint8_t> idle_detector(const std::vector<BusLevel>& levels);

}  // namespace cansim

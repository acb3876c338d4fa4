#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cansim {

// Closed forms for the three probabilistic-attacker scenarios. p is the
// per-bit flip success probability.

// all of k consecutive flips land
double p_run(double p, int k);

// at least one flip lands inside a 6-bit flag window
double p_window(double p);

// every one of w consecutive flag windows gets at least one hit
double p_sustain(double p, int w);

// upper binomial tail P(X >= k), X ~ B(n, p), summed in log space
double binom_tail(int n, int k, double p);

// at least 16 hits across a 64-bit data field
double p_passive(double p);

struct SweepResult {
    std::string scenario;
    double p = 0.0;
    double analytic = 0.0;
    double empirical = 0.0;
    uint64_t trials = 0;
    double ci_halfwidth = 0.0;  // 95% normal-approximation interval
};

// Monte Carlo estimates over a grid of p values. Scenarios:
//   run-of-11           11 draws, success iff all hit
//   flag-interruption   6 draws, success iff any hit
//   passive-in-data     64 draws, success iff at least 16 hit
//   end-to-end-stealthy full bus simulation of the single-message attack
//                       at flip probability p; success iff the victim goes
//                       bus-off with no completed error frame and no
//                       receiver error on the wire
// Deterministic for a given seed regardless of evaluation order. For the
// composite scenario the analytic column carries the heuristic reference
// p_passive(p); only the three reduced scenarios are exact.
std::vector<SweepResult> monte_carlo(const std::string& scenario,
                                     const std::vector<double>& grid, uint64_t trials,
                                     uint64_t seed);

std::vector<double> default_grid();  // 0.0, 0.1, ..., 1.0

bool write_sweep_csv(const std::string& path, const std::vector<SweepResult>& rows);
// same table, blank-line separated blocks per scenario for plotting
bool write_sweep_gnuplot(const std::string& path, const std::vector<SweepResult>& rows);

}  // namespace cansim

/* cansim.h - C interface to the CAN bit-level attack/defense simulator.
 *
 * The library simulates a CAN 2.0 bus one bit at a time: scheduled ECU
 * transmitters, an adversary with a constrained bit-flip channel,
 * resistant error signaling, and a monitoring node with an error ledger
 * and active probes. Scenarios come from TOML-style config files; runs
 * are deterministic for a given seed and write trace/alert/report
 * artifacts to a chosen directory.
 *
 * All functions returning cansim_status set a thread-local error string
 * readable through cansim_last_error() on failure.
 */
#ifndef CANSIM_H
#define CANSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CANSIM_VERSION_STRING "1.0.0"

typedef enum cansim_status {
    CANSIM_OK = 0,
    CANSIM_ERR_INVALID = 1, /* bad argument or malformed configuration */
    CANSIM_ERR_IO = 2,      /* a file could not be read or written */
    CANSIM_ERR_RUN = 3      /* the simulation could not complete */
} cansim_status;

typedef struct cansim_scenario cansim_scenario; /* opaque */
typedef struct cansim_report cansim_report;     /* opaque */

const char* cansim_version(void);

/* Description of the most recent failure on this thread; never NULL. */
const char* cansim_last_error(void);

/* -------------------------------------------------------------- runs -- */

cansim_status cansim_scenario_load(const char* path, cansim_scenario** out);
cansim_status cansim_scenario_parse(const char* text, cansim_scenario** out);
void cansim_scenario_free(cansim_scenario* scn);

/* Override the seed after loading (command-line convenience). */
cansim_status cansim_scenario_set_seed(cansim_scenario* scn, uint64_t seed);

/* Runs the scenario to its horizon. Artifacts (trace, alerts, report)
 * are written under out_dir; the returned handle carries the summary.
 * The run succeeding is independent of the simulated attack's outcome:
 * attack verdicts live in the report, not in the status code. */
cansim_status cansim_scenario_run(const cansim_scenario* scn, const char* out_dir,
                                  cansim_report** out);
void cansim_report_free(cansim_report* rep);

/* Looks up one summary row by key ("victim_bus_off", "ids_alerts",
 * "node.<name>.tec", ...). Returns NULL for unknown keys. The pointer
 * stays valid until cansim_report_free. */
const char* cansim_report_value(const cansim_report* rep, const char* key);

/* The whole summary as "key,value" CSV text, same lifetime. */
const char* cansim_report_csv(const cansim_report* rep);

/* ------------------------------------------------------------ sweeps -- */

/* Monte Carlo sweep of one attack scenario over a grid of per-bit flip
 * probabilities. Scenario names: "run-of-11", "flag-interruption",
 * "passive-in-data", "end-to-end-stealthy", or "all". Passing grid ==
 * NULL (n == 0) selects the default grid 0.0, 0.1, ..., 1.0. Results go
 * to csv_path; gnuplot_path (optional, may be NULL) receives the same
 * table in blank-line separated blocks for plotting. Deterministic per
 * seed: identical inputs produce identical bytes. */
cansim_status cansim_sweep(const char* scenario, const double* grid, size_t n,
                           uint64_t trials, uint64_t seed, const char* csv_path,
                           const char* gnuplot_path);

/* -------------------------------------------------- blind-sync demo -- */

typedef struct cansim_blindsync_stats {
    double utilization;   /* requested in-frame fraction of the bus */
    uint64_t trials;
    double synced_rate;   /* payload delivery rate with the sync prefix */
    double unsynced_rate; /* delivery rate of a naive blind injection */
    double idle_fraction; /* exact idle share of the configured traffic */
} cansim_blindsync_stats;

/* Measures blind-injection delivery rates against periodic background
 * traffic at the given utilization, with and without the read-free
 * synchronization prefix, over `trials` uniformly drawn start phases. */
cansim_status cansim_blindsync_demo(double utilization, uint64_t trials, uint64_t seed,
                                    cansim_blindsync_stats* out);

/* ---------------------------------------------------------- baseline -- */

/* Replays the scenario's roster without any attacker and trains the
 * monitor's aggregate error baseline, saved to baseline_path. Requires
 * the scenario to enable the monitor and set a window size. */
cansim_status cansim_train_baseline(const cansim_scenario* scn, const char* baseline_path);

#ifdef __cplusplus
}
#endif

#endif /* CANSIM_H */
